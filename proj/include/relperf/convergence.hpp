#pragma once

// Empirical study of the convergence of n-agent equilibrium strategies to
// the mean-field equilibrium as n grows. Two modes isolate the two effects:
// ReplicatedType keeps the empirical type law fixed (only the deterministic
// 1/n denominator correction remains), IidSampled draws types i.i.d. from
// the law (adding the O(n^-1/2) sampling fluctuation).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "relperf/core.hpp"
#include "relperf/equilibrium.hpp"
#include "relperf/parallel.hpp"
#include "relperf/rng.hpp"

namespace relperf {

enum class ConvergenceMode { ReplicatedType, IidSampled };

inline const char* to_string(ConvergenceMode m) {
  return m == ConvergenceMode::ReplicatedType ? "replicated_type"
                                              : "iid_sampled";
}

struct ConvergenceRow {
  std::int64_t n = 0;
  std::int64_t replications = 0;
  std::int64_t failures = 0;  // replications with no constant equilibrium
  double max_abs_error = 0.0;
  double mean_abs_error = 0.0;
};

struct ConvergenceTable {
  ConvergenceMode mode = ConvergenceMode::ReplicatedType;
  std::vector<ConvergenceRow> rows;
};

/// n i.i.d. type draws from d, deterministic given the seed. When
/// atom_indices is non-null it receives each agent's atom index.
inline Population sample_population(const TypeDistribution& d, std::int64_t n,
                                    std::uint64_t seed,
                                    std::vector<std::size_t>* atom_indices = nullptr) {
  if (n < 1) throw DomainError("population size must be >= 1");
  std::vector<double> cum(d.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    acc += d.atoms[k].weight;
    cum[k] = acc;
  }
  if (cum.empty()) throw DomainError("type distribution must contain at least one atom");
  cum.back() = 1.0;

  Population p;
  p.agents.reserve(static_cast<std::size_t>(n));
  if (atom_indices) atom_indices->clear();
  for (std::int64_t j = 0; j < n; ++j) {
    const double u = rng::unit(rng::stream_key(
        seed, static_cast<std::uint64_t>(j), rng::kNoAgent, rng::Role::TypeDraw));
    std::size_t k = 0;
    while (k + 1 < cum.size() && u > cum[k]) ++k;
    p.agents.push_back(d.atoms[k].type);
    if (atom_indices) atom_indices->push_back(k);
  }
  return p;
}

/// n agents replicating the atoms in proportion to their weights (largest
/// remainder apportionment; deterministic).
inline Population replicate_population(const TypeDistribution& d, std::int64_t n,
                                       std::vector<std::size_t>* atom_indices = nullptr) {
  if (n < 1) throw DomainError("population size must be >= 1");
  const std::size_t m = d.size();
  std::vector<std::int64_t> counts(m);
  std::vector<std::pair<double, std::size_t>> remainders(m);
  std::int64_t assigned = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double exact = d.atoms[k].weight * static_cast<double>(n);
    counts[k] = static_cast<std::int64_t>(std::floor(exact));
    assigned += counts[k];
    remainders[k] = {exact - std::floor(exact), k};
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::int64_t r = 0; r < n - assigned; ++r)
    ++counts[remainders[static_cast<std::size_t>(r) % m].second];

  Population p;
  p.agents.reserve(static_cast<std::size_t>(n));
  if (atom_indices) atom_indices->clear();
  for (std::size_t k = 0; k < m; ++k) {
    for (std::int64_t c = 0; c < counts[k]; ++c) {
      p.agents.push_back(d.atoms[k].type);
      if (atom_indices) atom_indices->push_back(k);
    }
  }
  return p;
}

/// For every n in n_list and every replication, solves the n-agent game and
/// compares each agent's strategy with the mean-field strategy of its own
/// type. Replications without a constant equilibrium are counted as failures
/// and excluded from the error statistics.
inline ConvergenceTable convergence_study(ModelKind kind,
                                          const TypeDistribution& d,
                                          const std::vector<std::int64_t>& n_list,
                                          std::int64_t replications,
                                          std::uint64_t seed,
                                          ConvergenceMode mode) {
  validate_distribution(d, kind);
  if (n_list.empty()) throw DomainError("n_list must not be empty");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (!(n_list[i] > n_list[i - 1]))
      throw DomainError("n_list must be strictly increasing");
  if (replications < 1) throw DomainError("replications must be >= 1");

  std::vector<double> mfe_strategy(d.size());
  if (kind == ModelKind::Cara) {
    const SolveResult r = cara_mfe(d);
    mfe_strategy = equilibrium(r).strategies;
  } else {
    mfe_strategy = crra_mfe(d).strategies;
  }

  ConvergenceTable table{mode, {}};
  for (const std::int64_t n : n_list) {
    struct RepStats {
      bool failed = false;
      double max_err = 0.0;
      double sum_err = 0.0;
      std::int64_t count = 0;
    };
    // ReplicatedType populations do not depend on the replication index.
    const std::int64_t reps =
        mode == ConvergenceMode::ReplicatedType ? 1 : replications;
    std::vector<RepStats> stats(static_cast<std::size_t>(reps));

    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
      std::vector<std::size_t> atoms;
      const Population p =
          mode == ConvergenceMode::ReplicatedType
              ? replicate_population(d, n, &atoms)
              : sample_population(
                    d, n, rng::replication_seed(seed, static_cast<std::uint64_t>(r)),
                    &atoms);

      std::vector<double> strat;
      if (kind == ModelKind::Cara) {
        const SolveResult sr = solve_cara_nash(p);
        if (!solved(sr)) {
          stats[r].failed = true;
          return;
        }
        strat = std::get<EquilibriumResult>(sr).strategies;
      } else {
        strat = solve_crra_nash(p).strategies;
      }

      RepStats& st = stats[r];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double err = std::abs(strat[j] - mfe_strategy[atoms[j]]);
        st.max_err = std::max(st.max_err, err);
        st.sum_err += err;
        ++st.count;
      }
    });

    ConvergenceRow row{n, replications, 0, 0.0, 0.0};
    double sum = 0.0;
    std::int64_t count = 0;
    std::int64_t ok = 0;
    for (const RepStats& st : stats) {
      if (st.failed) {
        ++row.failures;
        continue;
      }
      ++ok;
      row.max_abs_error = std::max(row.max_abs_error, st.max_err);
      sum += st.sum_err;
      count += st.count;
    }
    if (mode == ConvergenceMode::ReplicatedType) {
      // a single deterministic replication stands for all of them
      row.failures *= replications;
      ok *= replications;
    }
    row.mean_abs_error = count > 0 ? sum / static_cast<double>(count) : 0.0;
    table.rows.push_back(row);
  }
  return table;
}

/// Least-squares decay exponent of mean_abs_error against n: fits
/// log(error) = c - beta log(n) and returns beta.
inline double fitted_decay_exponent(const ConvergenceTable& table) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (const ConvergenceRow& row : table.rows) {
    if (!(row.mean_abs_error > 0.0)) continue;
    const double x = std::log(static_cast<double>(row.n));
    const double y = std::log(row.mean_abs_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) throw DomainError("decay fit needs at least two positive errors");
  const double denom = static_cast<double>(m) * sxx - sx * sx;
  const double slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
  return -slope;
}

}  // namespace relperf
