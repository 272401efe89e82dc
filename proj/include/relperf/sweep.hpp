#pragma once

// Parameter sweeps over equilibrium strategies, including the built-in
// presets fig1/fig2/fig3 that reproduce the single-stock surfaces at their
// published parameterizations. Cells evaluate in parallel; rows are emitted
// in deterministic grid order, and cells without a constant equilibrium are
// flagged rather than dropped.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relperf/core.hpp"
#include "relperf/equilibrium.hpp"
#include "relperf/io.hpp"
#include "relperf/parallel.hpp"

namespace relperf {

struct SweepCell {
  std::vector<double> params;
  std::optional<double> pi_star;  // empty when no constant equilibrium exists
};

struct SweepResult {
  std::vector<std::string> param_names;
  std::vector<std::int64_t> counts;
  std::vector<SweepCell> cells;  // grid order, first axis outermost
};

inline double grid_value(const SweepAxis& axis, std::int64_t i) {
  if (axis.count < 2) throw ConfigError("sweep grids need at least 2 points per axis");
  // endpoint-blended form: exact at both ends and at rational interior points
  const double m = static_cast<double>(axis.count - 1);
  return (axis.min * (m - static_cast<double>(i)) +
          axis.max * static_cast<double>(i)) /
         m;
}

namespace detail {

// Mean-field strategy of a probe type against a population whose aggregates
// come from d; NoEquilibrium maps to an empty cell.
inline std::optional<double> probe_strategy(ModelKind kind,
                                            const AgentType& probe,
                                            const TypeDistribution& d) {
  if (kind == ModelKind::Cara) {
    const Aggregates agg = cara_aggregates_mf(d);
    if (!agg.aggregate_vol) return std::nullopt;
    return cara_strategy(probe, *agg.aggregate_vol);
  }
  const Aggregates agg = crra_aggregates_mf(d);
  return crra_strategy(probe, *agg.aggregate_vol);
}

template <typename Cell>
inline SweepResult evaluate_grid(const std::vector<std::string>& names,
                                 const std::vector<SweepAxis>& axes,
                                 Cell&& cell) {
  SweepResult out;
  out.param_names = names;
  std::size_t total = 1;
  for (const SweepAxis& a : axes) {
    if (a.count < 2) throw ConfigError("sweep grids need at least 2 points per axis");
    out.counts.push_back(a.count);
    total *= static_cast<std::size_t>(a.count);
  }
  out.cells.resize(total);
  parallel_for(total, [&](std::size_t idx) {
    std::vector<double> values(axes.size());
    std::size_t rem = idx;
    for (std::size_t a = axes.size(); a-- > 0;) {
      const std::size_t c = static_cast<std::size_t>(axes[a].count);
      values[a] = grid_value(axes[a], static_cast<std::int64_t>(rem % c));
      rem /= c;
    }
    out.cells[idx].params = values;
    out.cells[idx].pi_star = cell(values);
  });
  return out;
}

}  // namespace detail

/// fig1: CARA single stock, probe (delta=5, theta) against a population with
/// delta_bar=6 and theta_bar, mu=sigma=1. The theta_bar grid stops at 0.95 to
/// stay inside the existence region.
/// fig2: CRRA single stock, probe (delta, theta=3/4) against delta_bar=2 and
/// theta_bar, mu=5, sigma=1 (theta and delta uncorrelated).
/// fig3: CRRA single stock, probe (delta, theta) against delta_bar=2,
/// theta_bar=1/5, mu=5, sigma=1.
inline SweepResult run_sweep_preset(const std::string& name) {
  if (name == "fig1") {
    const std::vector<SweepAxis> axes{{"theta", 0.0, 1.0, 21},
                                      {"theta_bar", 0.0, 0.95, 20}};
    return detail::evaluate_grid(
        {"theta", "theta_bar"}, axes, [&](const std::vector<double>& v) {
          AgentType probe{0.0, 5.0, v[0], 1.0, 0.0, 1.0};
          AgentType pop{0.0, 6.0, v[1], 1.0, 0.0, 1.0};
          return detail::probe_strategy(ModelKind::Cara, probe,
                                        point_mass(pop));
        });
  }
  if (name == "fig2") {
    const std::vector<SweepAxis> axes{{"delta", 0.25, 4.0, 16},
                                      {"theta_bar", 0.0, 1.0, 21}};
    return detail::evaluate_grid(
        {"delta", "theta_bar"}, axes, [&](const std::vector<double>& v) {
          AgentType probe{1.0, v[0], 0.75, 5.0, 0.0, 1.0};
          AgentType pop{1.0, 2.0, v[1], 5.0, 0.0, 1.0};
          return detail::probe_strategy(ModelKind::Crra, probe,
                                        point_mass(pop));
        });
  }
  if (name == "fig3") {
    const std::vector<SweepAxis> axes{{"delta", 0.25, 4.0, 16},
                                      {"theta", 0.0, 1.0, 21}};
    return detail::evaluate_grid(
        {"delta", "theta"}, axes, [&](const std::vector<double>& v) {
          AgentType probe{1.0, v[0], v[1], 5.0, 0.0, 1.0};
          AgentType pop{1.0, 2.0, 0.2, 5.0, 0.0, 1.0};
          return detail::probe_strategy(ModelKind::Crra, probe,
                                        point_mass(pop));
        });
  }
  throw ConfigError("unknown sweep preset: " + name +
                    " (expected fig1, fig2, or fig3)");
}

/// Custom sweep over the fields of a point-mass mean-field distribution. The
/// probe agent is the atom itself, so each cell is the symmetric mean-field
/// equilibrium at the swept parameter values.
inline SweepResult run_sweep_custom(ModelKind kind, const TypeDistribution& d,
                                    const SweepSpec& spec) {
  if (d.size() != 1)
    throw ConfigError("custom sweeps require a point-mass distribution");
  if (spec.axes.empty() || spec.axes.size() > 2)
    throw ConfigError("custom sweeps take one or two parameters");

  std::vector<std::string> names;
  for (const SweepAxis& a : spec.axes) names.push_back(a.name);

  auto apply = [](AgentType t, const std::string& name, double v) {
    if (name == "x0")
      t.x0 = v;
    else if (name == "delta")
      t.delta = v;
    else if (name == "theta")
      t.theta = v;
    else if (name == "mu")
      t.mu = v;
    else if (name == "nu")
      t.nu = v;
    else if (name == "sigma")
      t.sigma = v;
    else
      throw ConfigError("unknown sweep parameter: " + name);
    return t;
  };

  const AgentType base = d.atoms.front().type;
  return detail::evaluate_grid(names, spec.axes,
                               [&](const std::vector<double>& v) {
                                 AgentType t = base;
                                 for (std::size_t a = 0; a < v.size(); ++a)
                                   t = apply(t, spec.axes[a].name, v[a]);
                                 validate_type(t, kind);
                                 return detail::probe_strategy(kind, t,
                                                               point_mass(t));
                               });
}

inline std::string sweep_csv(const SweepResult& r) {
  CsvWriter csv;
  for (const std::string& name : r.param_names) csv.field(name);
  csv.field(std::string("pi_star"));
  csv.field(std::string("no_equilibrium"));
  csv.end_row();
  for (const SweepCell& cell : r.cells) {
    for (double v : cell.params) csv.field(v);
    if (cell.pi_star) {
      csv.field(*cell.pi_star);
      csv.field(static_cast<std::int64_t>(0));
    } else {
      csv.empty_field();
      csv.field(static_cast<std::int64_t>(1));
    }
    csv.end_row();
  }
  return csv.str();
}

}  // namespace relperf
