#pragma once

// Subcommand implementations behind the CLI. Each returns the process exit
// code: 0 success, 1 configuration/domain error, 2 no constant equilibrium,
// 3 verification failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "relperf/convergence.hpp"
#include "relperf/core.hpp"
#include "relperf/equilibrium.hpp"
#include "relperf/io.hpp"
#include "relperf/simulation.hpp"
#include "relperf/sweep.hpp"

namespace relperf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNoEquilibrium = 2;
inline constexpr int kExitVerifyFailed = 3;

inline constexpr double kVerifyTol = 1e-6;

namespace detail {

inline void emit(const std::filesystem::path& out_dir, const std::string& name,
                 const json& j) {
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / name, j.dump(2) + "\n");
}

inline void emit(const std::filesystem::path& out_dir, const std::string& name,
                 const std::string& text) {
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / name, text);
}

inline SolveResult dispatch_solve(const RunConfig& cfg) {
  if (cfg.setting == Setting::NAgent) {
    if (cfg.kind == ModelKind::Cara) return solve_cara_nash(*cfg.population);
    return SolveResult{solve_crra_nash(*cfg.population)};
  }
  if (cfg.kind == ModelKind::Cara) return cara_mfe(*cfg.distribution);
  return SolveResult{crra_mfe(*cfg.distribution)};
}

inline json no_equilibrium_report(const RunConfig& cfg, const NoEquilibrium& ne) {
  return json{{"status", "no_equilibrium"},
              {"model", to_string(cfg.kind)},
              {"setting", to_string(cfg.setting)},
              {"psi", ne.psi},
              {"phi", ne.phi},
              {"reason", "psi = 1; a constant equilibrium requires psi < 1"}};
}

inline json solve_report(const RunConfig& cfg, const EquilibriumResult& eq) {
  json report{{"status", "ok"},
              {"model", to_string(cfg.kind)},
              {"setting", to_string(cfg.setting)},
              {"strategies", eq.strategies},
              {"aggregates", to_json(eq.aggregates)},
              {"warnings", eq.warnings}};

  json exponents = json::array();
  if (cfg.setting == Setting::NAgent) {
    const Population& p = *cfg.population;
    json hats = json::array();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const ValueExponent v =
          cfg.kind == ModelKind::Cara
              ? cara_value_exponent_n(p, eq.strategies, i)
              : crra_value_exponent_n(p, eq.strategies, i);
      exponents.push_back(to_json(v));
      hats.push_back(to_json(hat_quantities(p, eq.strategies, i)));
    }
    report["hat_quantities"] = hats;
  } else {
    const TypeDistribution& d = *cfg.distribution;
    for (const WeightedType& a : d.atoms) {
      const ValueExponent v = cfg.kind == ModelKind::Cara
                                  ? cara_value_exponent_mf(d, a.type)
                                  : crra_value_exponent_mf(d, a.type);
      exponents.push_back(to_json(v));
    }
  }
  report["value_exponents"] = exponents;
  return report;
}

}  // namespace detail

/// solve: compute the constant equilibrium and write equilibrium.json.
inline int run_solve(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const SolveResult result = detail::dispatch_solve(cfg);
  if (!solved(result)) {
    const auto& ne = std::get<NoEquilibrium>(result);
    detail::emit(out_dir, "equilibrium.json", detail::no_equilibrium_report(cfg, ne));
    std::cerr << "no constant equilibrium: psi = " << format_double(ne.psi)
              << " (psi < 1 required)\n";
    return kExitNoEquilibrium;
  }
  const EquilibriumResult& eq = std::get<EquilibriumResult>(result);
  detail::emit(out_dir, "equilibrium.json", detail::solve_report(cfg, eq));
  return kExitOk;
}

/// verify: best-response check for every agent/atom (candidates may be
/// overridden via the config's "strategies"), plus the mean-field
/// consistency check where applicable. Writes verify.json.
inline int run_verify(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const SolveResult result = detail::dispatch_solve(cfg);
  if (!solved(result)) {
    const auto& ne = std::get<NoEquilibrium>(result);
    detail::emit(out_dir, "verify.json", detail::no_equilibrium_report(cfg, ne));
    return kExitNoEquilibrium;
  }
  const EquilibriumResult& eq = std::get<EquilibriumResult>(result);

  std::vector<double> candidates = eq.strategies;
  if (cfg.strategies) {
    if (cfg.strategies->size() != candidates.size())
      throw ConfigError("strategy override has the wrong length");
    candidates = *cfg.strategies;
  }

  bool all_passed = true;
  json checks = json::array();

  if (cfg.setting == Setting::NAgent) {
    const Population& p = *cfg.population;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double argmax =
          best_response(cfg.kind, i, p, candidates, cfg.horizon_t);
      const double diff = std::abs(argmax - candidates[i]);
      const bool ok = diff <= kVerifyTol;
      all_passed = all_passed && ok;
      checks.push_back(json{{"index", i},
                            {"candidate", candidates[i]},
                            {"argmax", argmax},
                            {"abs_diff", diff},
                            {"passed", ok}});
    }
  } else {
    const TypeDistribution& d = *cfg.distribution;
    EquilibriumResult candidate_eq = eq;
    candidate_eq.strategies = candidates;
    const AggregateLaw law = aggregate_law(cfg.kind, d, candidate_eq);
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double argmax =
          mfe_best_response(cfg.kind, d.atoms[k].type, law, cfg.horizon_t,
                            std::nullopt, candidates[k]);
      const double diff = std::abs(argmax - candidates[k]);
      const bool ok = diff <= kVerifyTol;
      all_passed = all_passed && ok;
      checks.push_back(json{{"index", k},
                            {"candidate", candidates[k]},
                            {"argmax", argmax},
                            {"abs_diff", diff},
                            {"passed", ok}});
    }
  }

  json report{{"status", all_passed ? "ok" : "failed"},
              {"tolerance", kVerifyTol},
              {"best_response", checks}};

  if (cfg.setting == Setting::MeanField) {
    EquilibriumResult candidate_eq = eq;
    candidate_eq.strategies = candidates;
    const ConsistencyReport consistency =
        mfe_consistency_check(cfg.kind, *cfg.distribution, candidate_eq, cfg.sim);
    all_passed = all_passed && consistency.passed;
    report["consistency"] = to_json(consistency);
    report["status"] = all_passed ? "ok" : "failed";
  }

  detail::emit(out_dir, "verify.json", report);
  return all_passed ? kExitOk : kExitVerifyFailed;
}

/// sweep: evaluate a preset or custom grid and write sweep.csv.
inline int run_sweep(const RunConfig& cfg, const std::filesystem::path& out_dir,
                     const std::optional<std::string>& preset_flag) {
  std::optional<std::string> preset = preset_flag;
  if (!preset && cfg.sweep && cfg.sweep->preset) preset = cfg.sweep->preset;

  SweepResult result;
  if (preset) {
    result = run_sweep_preset(*preset);
  } else {
    if (!cfg.sweep || cfg.sweep->axes.empty())
      throw ConfigError("sweep requires a preset or a params block");
    if (cfg.setting != Setting::MeanField || !cfg.distribution)
      throw ConfigError("custom sweeps require a mean_field distribution");
    result = run_sweep_custom(cfg.kind, *cfg.distribution, *cfg.sweep);
  }
  detail::emit(out_dir, "sweep.csv", sweep_csv(result));
  return kExitOk;
}

/// converge: run the convergence study and write converge.csv.
inline int run_converge(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  if (!cfg.converge) throw ConfigError("converge requires a converge block");
  if (!cfg.distribution)
    throw ConfigError("converge requires a type distribution");
  const ConvergenceTable table =
      convergence_study(cfg.kind, *cfg.distribution, cfg.converge->n_list,
                        cfg.converge->replications, cfg.sim.seed,
                        cfg.converge->mode);
  detail::emit(out_dir, "converge.csv", converge_csv(table));
  return kExitOk;
}

/// simulate: n_agent configs get a terminal-wealth matrix (wealth.csv), a
/// per-agent payoff report (payoffs.json), and optional paths.csv when
/// time_steps > 1; mean_field configs get the consistency check
/// (consistency.json).
inline int run_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const SolveResult result = detail::dispatch_solve(cfg);
  if (!solved(result)) {
    const auto& ne = std::get<NoEquilibrium>(result);
    detail::emit(out_dir, "simulate.json", detail::no_equilibrium_report(cfg, ne));
    return kExitNoEquilibrium;
  }
  const EquilibriumResult& eq = std::get<EquilibriumResult>(result);
  std::vector<double> strategies = eq.strategies;
  if (cfg.strategies) {
    if (cfg.strategies->size() != strategies.size())
      throw ConfigError("strategy override has the wrong length");
    strategies = *cfg.strategies;
  }

  if (cfg.setting == Setting::MeanField) {
    EquilibriumResult candidate_eq = eq;
    candidate_eq.strategies = strategies;
    const ConsistencyReport rep =
        mfe_consistency_check(cfg.kind, *cfg.distribution, candidate_eq, cfg.sim);
    detail::emit(out_dir, "consistency.json", to_json(rep));
    return kExitOk;
  }

  const Population& p = *cfg.population;
  std::vector<StrategyAgent> agents;
  agents.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    agents.push_back({p.agents[i], strategies[i]});

  const WealthMatrix m = simulate_terminal(cfg.kind, agents, cfg.sim, true);
  detail::emit(out_dir, "wealth.csv", wealth_csv(m));

  json payoffs = json::array();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const PayoffEstimate est = mc_payoff(cfg.kind, i, p, strategies, cfg.sim);
    payoffs.push_back(json{
        {"index", i},
        {"estimate", to_json(est)},
        {"exact", exact_payoff(cfg.kind, i, p, strategies, cfg.horizon_t)}});
  }
  detail::emit(out_dir, "payoffs.json",
               json{{"strategies", strategies}, {"payoffs", payoffs}});

  if (cfg.sim.time_steps > 1) {
    const PathMatrix paths = simulate_paths(cfg.kind, agents, cfg.sim, true);
    detail::emit(out_dir, "paths.csv", paths_csv(paths, cfg.sim.horizon_t));
  }
  return kExitOk;
}

}  // namespace relperf
