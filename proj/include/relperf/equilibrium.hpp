#pragma once

// Closed-form constant Nash equilibria of the n-agent CARA/CRRA games under
// relative performance concerns, constant mean-field equilibria of the
// corresponding mean field games, equilibrium value-function exponents,
// effective risk tolerances, and an independent fixed-point aggregate oracle.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "relperf/core.hpp"

namespace relperf {

enum class Setting { NAgent, MeanField };

inline const char* to_string(Setting s) {
  return s == Setting::NAgent ? "n_agent" : "mean_field";
}

/// Aggregate constants (phi, psi) of an instance, and the equilibrium
/// volatility of aggregate wealth phi/(1-psi) (CARA) or phi/(1+psi) (CRRA)
/// when defined.
struct Aggregates {
  double phi = 0.0;
  double psi = 0.0;
  std::optional<double> aggregate_vol;
};

struct EquilibriumResult {
  ModelKind kind = ModelKind::Cara;
  Setting setting = Setting::NAgent;
  std::vector<double> strategies;  // per agent (NAgent) or per atom (MeanField)
  Aggregates aggregates;
  std::vector<std::string> warnings;
};

/// Outcome when no constant equilibrium exists (CARA with psi = 1).
struct NoEquilibrium {
  double psi = 1.0;
  double phi = 0.0;
};

using SolveResult = std::variant<EquilibriumResult, NoEquilibrium>;

inline bool solved(const SolveResult& r) {
  return std::holds_alternative<EquilibriumResult>(r);
}

inline const EquilibriumResult& equilibrium(const SolveResult& r) {
  if (const auto* eq = std::get_if<EquilibriumResult>(&r)) return *eq;
  throw DomainError("no constant equilibrium exists: psi = " +
                    std::to_string(std::get<NoEquilibrium>(r).psi) +
                    " (existence requires psi < 1)");
}

// |1-psi| at or below the singular tolerance means no equilibrium; between
// the two tolerances the solve succeeds with an ill-conditioning warning.
inline constexpr double kSingularPsiTol = 1e-12;
inline constexpr double kIllConditionedPsiTol = 1e-6;

namespace detail {

inline double sq(double x) { return x * x; }

inline std::string ill_conditioning_warning(double gap) {
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "near-singular aggregate equation: |1-psi| = %.3e "
                "(condition number %.3e)",
                std::abs(gap), 1.0 / std::abs(gap));
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-agent strategy / best-response formulas
// ---------------------------------------------------------------------------

/// Finite-population variance denominator sigma^2 + nu^2 (1 - theta/n).
inline double cara_denominator(const AgentType& a, std::size_t n) {
  return a.sigma * a.sigma +
         a.nu * a.nu * (1.0 - a.theta / static_cast<double>(n));
}

/// Finite-population variance denominator sigma^2 + nu^2 (1 + (delta-1) theta/n).
inline double crra_denominator(const AgentType& a, std::size_t n) {
  return a.sigma * a.sigma +
         a.nu * a.nu *
             (1.0 + (a.delta - 1.0) * a.theta / static_cast<double>(n));
}

/// CARA best response to an aggregate wealth volatility s = mean(sigma*pi).
/// With the equilibrium aggregate s = phi/(1-psi) this is the equilibrium
/// strategy itself. Passing n applies the finite-population denominator;
/// omitting it gives the mean-field form.
inline double cara_strategy(const AgentType& a, double s,
                            std::optional<std::size_t> n = std::nullopt) {
  const double den = n ? cara_denominator(a, *n) : a.total_variance();
  return (a.delta * a.mu + a.theta * a.sigma * s) / den;
}

/// CRRA best response to an aggregate s = mean(sigma*pi); equilibrium
/// strategy at s = phi/(1+psi).
inline double crra_strategy(const AgentType& a, double s,
                            std::optional<std::size_t> n = std::nullopt) {
  const double den = n ? crra_denominator(a, *n) : a.total_variance();
  return (a.delta * a.mu - a.theta * (a.delta - 1.0) * a.sigma * s) / den;
}

// ---------------------------------------------------------------------------
// Aggregates
// ---------------------------------------------------------------------------

inline Aggregates cara_aggregates_n(const Population& p) {
  validate_population(p, ModelKind::Cara);
  const std::size_t n = p.size();
  double phi = 0.0;
  double psi = 0.0;
  for (const AgentType& a : p.agents) {
    const double den = cara_denominator(a, n);
    phi += a.delta * a.mu * a.sigma / den;
    psi += a.theta * a.sigma * a.sigma / den;
  }
  phi /= static_cast<double>(n);
  psi /= static_cast<double>(n);
  Aggregates agg{phi, psi, std::nullopt};
  if (std::abs(1.0 - psi) > kSingularPsiTol)
    agg.aggregate_vol = phi / (1.0 - psi);
  return agg;
}

inline Aggregates crra_aggregates_n(const Population& p) {
  validate_population(p, ModelKind::Crra);
  const std::size_t n = p.size();
  double phi = 0.0;
  double psi = 0.0;
  for (const AgentType& a : p.agents) {
    const double den = crra_denominator(a, n);
    phi += a.delta * a.mu * a.sigma / den;
    psi += a.theta * (a.delta - 1.0) * a.sigma * a.sigma / den;
  }
  phi /= static_cast<double>(n);
  psi /= static_cast<double>(n);
  // 1 + psi > 0 holds for every valid population
  return Aggregates{phi, psi, phi / (1.0 + psi)};
}

inline Aggregates cara_aggregates_mf(const TypeDistribution& d) {
  validate_distribution(d, ModelKind::Cara);
  const double phi = expect(d, [](const AgentType& a) {
    return a.delta * a.mu * a.sigma / a.total_variance();
  });
  const double psi = expect(d, [](const AgentType& a) {
    return a.theta * a.sigma * a.sigma / a.total_variance();
  });
  Aggregates agg{phi, psi, std::nullopt};
  if (std::abs(1.0 - psi) > kSingularPsiTol)
    agg.aggregate_vol = phi / (1.0 - psi);
  return agg;
}

inline Aggregates crra_aggregates_mf(const TypeDistribution& d) {
  validate_distribution(d, ModelKind::Crra);
  const double phi = expect(d, [](const AgentType& a) {
    return a.delta * a.mu * a.sigma / a.total_variance();
  });
  const double psi = expect(d, [](const AgentType& a) {
    return a.theta * (a.delta - 1.0) * a.sigma * a.sigma / a.total_variance();
  });
  return Aggregates{phi, psi, phi / (1.0 + psi)};
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

inline SolveResult solve_cara_nash(const Population& p) {
  const Aggregates agg = cara_aggregates_n(p);
  const double gap = 1.0 - agg.psi;
  if (std::abs(gap) <= kSingularPsiTol) return NoEquilibrium{agg.psi, agg.phi};

  EquilibriumResult r{ModelKind::Cara, Setting::NAgent, {}, agg, {}};
  const double s = *agg.aggregate_vol;
  r.strategies.reserve(p.size());
  for (const AgentType& a : p.agents)
    r.strategies.push_back(cara_strategy(a, s, p.size()));
  if (std::abs(gap) < kIllConditionedPsiTol)
    r.warnings.push_back(detail::ill_conditioning_warning(gap));
  return r;
}

/// A constant CRRA equilibrium always exists (1 + psi > 0).
inline EquilibriumResult solve_crra_nash(const Population& p) {
  const Aggregates agg = crra_aggregates_n(p);
  EquilibriumResult r{ModelKind::Crra, Setting::NAgent, {}, agg, {}};
  const double s = *agg.aggregate_vol;
  r.strategies.reserve(p.size());
  for (const AgentType& a : p.agents)
    r.strategies.push_back(crra_strategy(a, s, p.size()));
  return r;
}

inline SolveResult cara_mfe(const TypeDistribution& d) {
  const Aggregates agg = cara_aggregates_mf(d);
  const double gap = 1.0 - agg.psi;
  if (std::abs(gap) <= kSingularPsiTol) return NoEquilibrium{agg.psi, agg.phi};

  EquilibriumResult r{ModelKind::Cara, Setting::MeanField, {}, agg, {}};
  const double s = *agg.aggregate_vol;
  r.strategies.reserve(d.size());
  for (const WeightedType& a : d.atoms)
    r.strategies.push_back(cara_strategy(a.type, s));
  if (std::abs(gap) < kIllConditionedPsiTol)
    r.warnings.push_back(detail::ill_conditioning_warning(gap));
  return r;
}

inline EquilibriumResult crra_mfe(const TypeDistribution& d) {
  const Aggregates agg = crra_aggregates_mf(d);
  EquilibriumResult r{ModelKind::Crra, Setting::MeanField, {}, agg, {}};
  const double s = *agg.aggregate_vol;
  r.strategies.reserve(d.size());
  for (const WeightedType& a : d.atoms)
    r.strategies.push_back(crra_strategy(a.type, s));
  return r;
}

// ---------------------------------------------------------------------------
// Value-function exponents
// ---------------------------------------------------------------------------

enum class ValueSetting {
  CaraNAgent,
  CaraMeanField,
  CrraNAgentPower,
  CrraNAgentLog,
  CrraMeanFieldPower,
  CrraMeanFieldLog,
};

inline const char* to_string(ValueSetting s) {
  switch (s) {
    case ValueSetting::CaraNAgent: return "cara_n_agent";
    case ValueSetting::CaraMeanField: return "cara_mean_field";
    case ValueSetting::CrraNAgentPower: return "crra_n_agent_power";
    case ValueSetting::CrraNAgentLog: return "crra_n_agent_log";
    case ValueSetting::CrraMeanFieldPower: return "crra_mean_field_power";
    case ValueSetting::CrraMeanFieldLog: return "crra_mean_field_log";
  }
  return "?";
}

/// The constant rho of the separable value-function factor f(t).
struct ValueExponent {
  double rho = 0.0;
  ValueSetting setting = ValueSetting::CaraNAgent;
};

/// Leave-one-out averages over the other agents' strategies, normalized by
/// 1/n (not 1/(n-1)).
struct HatQuantities {
  double mu_alpha = 0.0;        // (1/n) sum_{k != i} mu_k alpha_k
  double sigma_alpha = 0.0;     // (1/n) sum_{k != i} sigma_k alpha_k
  double nu_alpha_sq = 0.0;     // (1/n) sum_{k != i} nu_k^2 alpha_k^2
  double total_var_alpha_sq = 0.0;  // (1/n) sum_{k != i} (sigma_k^2+nu_k^2) alpha_k^2
  double eta = 0.0;             // leave-one-out drift of the geometric aggregate
};

inline HatQuantities hat_quantities(const Population& p,
                                    const std::vector<double>& strategies,
                                    std::size_t i) {
  if (strategies.size() != p.size())
    throw DomainError("strategies must match the population size");
  if (i >= p.size()) throw DomainError("agent index out of range");
  HatQuantities h;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k == i) continue;
    const AgentType& a = p.agents[k];
    const double alpha = strategies[k];
    h.mu_alpha += a.mu * alpha;
    h.sigma_alpha += a.sigma * alpha;
    h.nu_alpha_sq += a.nu * a.nu * alpha * alpha;
    h.total_var_alpha_sq += a.total_variance() * alpha * alpha;
  }
  const double n = static_cast<double>(p.size());
  h.mu_alpha /= n;
  h.sigma_alpha /= n;
  h.nu_alpha_sq /= n;
  h.total_var_alpha_sq /= n;
  h.eta = h.mu_alpha - 0.5 * (h.total_var_alpha_sq -
                              h.sigma_alpha * h.sigma_alpha -
                              h.nu_alpha_sq / n);
  return h;
}

inline ValueExponent cara_value_exponent_n(const Population& p,
                                           const std::vector<double>& strategies,
                                           std::size_t i) {
  validate_population(p, ModelKind::Cara);
  const HatQuantities h = hat_quantities(p, strategies, i);
  const AgentType& a = p.agents[i];
  const double n = static_cast<double>(p.size());
  const double ratio = a.theta / a.delta;
  const double rho =
      detail::sq(a.mu + ratio * a.sigma * h.sigma_alpha) /
          (2.0 * a.total_variance()) -
      ratio * h.mu_alpha -
      0.5 * ratio * ratio *
          (h.sigma_alpha * h.sigma_alpha + h.nu_alpha_sq / n);
  return {rho, ValueSetting::CaraNAgent};
}

/// CARA mean-field value exponent, evaluated through the explicit constants
/// phi~ = E[theta mu sigma / (sigma^2+nu^2)] and
/// psi~ = E[delta mu^2 / (sigma^2+nu^2)].
inline ValueExponent cara_value_exponent_mf(const TypeDistribution& d,
                                            const AgentType& agent) {
  validate_type(agent, ModelKind::Cara);
  const Aggregates agg = cara_aggregates_mf(d);
  if (!agg.aggregate_vol)
    throw DomainError("no constant equilibrium exists: psi = 1");
  const double s = *agg.aggregate_vol;
  const double phi_tilde = expect(d, [](const AgentType& a) {
    return a.theta * a.mu * a.sigma / a.total_variance();
  });
  const double psi_tilde = expect(d, [](const AgentType& a) {
    return a.delta * a.mu * a.mu / a.total_variance();
  });
  const double ratio = agent.theta / agent.delta;
  const double rho =
      detail::sq(agent.mu + ratio * s * agent.sigma) /
          (2.0 * agent.total_variance()) -
      ratio * (psi_tilde + phi_tilde * s);
  return {rho, ValueSetting::CaraMeanField};
}

namespace detail {

inline bool is_log_branch(ValueSetting s) {
  return s == ValueSetting::CrraNAgentLog || s == ValueSetting::CrraMeanFieldLog;
}

inline void check_crra_branch(ValueSetting requested, double delta) {
  const bool log_utility = (delta == 1.0);
  if (log_utility != is_log_branch(requested))
    throw DomainError(log_utility
                          ? "delta = 1 selects the log branch"
                          : "delta != 1 selects the power branch");
}

}  // namespace detail

inline ValueExponent crra_value_exponent_n(const Population& p,
                                           const std::vector<double>& strategies,
                                           std::size_t i,
                                           ValueSetting requested) {
  validate_population(p, ModelKind::Crra);
  if (requested != ValueSetting::CrraNAgentPower &&
      requested != ValueSetting::CrraNAgentLog)
    throw DomainError("requested setting is not an n-agent CRRA branch");
  const AgentType& a = p.agents.at(i);
  detail::check_crra_branch(requested, a.delta);

  const HatQuantities h = hat_quantities(p, strategies, i);
  const double n = static_cast<double>(p.size());
  const double shrink = 1.0 - a.theta / n;
  const double noise = h.sigma_alpha * h.sigma_alpha + h.nu_alpha_sq / n;

  if (requested == ValueSetting::CrraNAgentLog) {
    const double rho = a.mu * a.mu * shrink / (2.0 * a.total_variance()) -
                       a.theta * h.eta + 0.5 * a.theta * noise;
    return {rho, requested};
  }

  const double q = 1.0 - 1.0 / a.delta;
  const double denom = 2.0 * a.total_variance() * shrink * (1.0 - shrink * q);
  if (denom == 0.0)
    throw DomainError("value exponent degenerates when theta/n = 1");
  const double rho =
      detail::sq(a.mu * shrink - a.sigma * h.sigma_alpha * a.theta * shrink * q) /
          denom -
      h.eta * a.theta + 0.5 * noise * a.theta * (1.0 + a.theta * q);
  return {rho, requested};
}

/// Auto-selects the CRRA n-agent branch from delta.
inline ValueExponent crra_value_exponent_n(const Population& p,
                                           const std::vector<double>& strategies,
                                           std::size_t i) {
  const ValueSetting branch = p.agents.at(i).delta == 1.0
                                  ? ValueSetting::CrraNAgentLog
                                  : ValueSetting::CrraNAgentPower;
  return crra_value_exponent_n(p, strategies, i, branch);
}

inline ValueExponent crra_value_exponent_mf(const TypeDistribution& d,
                                            const AgentType& agent,
                                            ValueSetting requested) {
  validate_type(agent, ModelKind::Crra);
  if (requested != ValueSetting::CrraMeanFieldPower &&
      requested != ValueSetting::CrraMeanFieldLog)
    throw DomainError("requested setting is not a mean-field CRRA branch");
  detail::check_crra_branch(requested, agent.delta);

  const EquilibriumResult mfe = crra_mfe(d);
  const double s = *mfe.aggregates.aggregate_vol;
  double mu_alpha = 0.0;
  double total_var_alpha_sq = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const AgentType& t = d.atoms[k].type;
    const double alpha = mfe.strategies[k];
    mu_alpha += d.atoms[k].weight * t.mu * alpha;
    total_var_alpha_sq += d.atoms[k].weight * t.total_variance() * alpha * alpha;
  }
  const double eta = mu_alpha - 0.5 * (total_var_alpha_sq - s * s);

  if (requested == ValueSetting::CrraMeanFieldLog) {
    const double rho = agent.mu * agent.mu / (2.0 * agent.total_variance()) -
                       eta * agent.theta + 0.5 * agent.theta * s * s;
    return {rho, requested};
  }

  // Power branch: the factor f(t) = exp(rho (1-1/delta) (T-t)), the same
  // convention as the finite-population branch; rho here is the
  // n -> infinity limit of the finite-population exponent.
  const double q = 1.0 - 1.0 / agent.delta;
  const double rho =
      detail::sq(agent.mu * agent.delta -
                 agent.theta * (agent.delta - 1.0) * agent.sigma * s) /
          (2.0 * agent.total_variance() * agent.delta) -
      eta * agent.theta +
      0.5 * s * s * agent.theta * (1.0 + agent.theta * q);
  return {rho, requested};
}

/// Auto-selects the CRRA mean-field branch from delta.
inline ValueExponent crra_value_exponent_mf(const TypeDistribution& d,
                                            const AgentType& agent) {
  const ValueSetting branch = agent.delta == 1.0
                                  ? ValueSetting::CrraMeanFieldLog
                                  : ValueSetting::CrraMeanFieldPower;
  return crra_value_exponent_mf(d, agent, branch);
}

/// Representative-agent equilibrium value U(x, m, t) as a function of own
/// wealth, the population mean wealth, and time (CARA mean-field only):
/// U = -exp(-(x - theta m̄)/delta - rho (T - t)).
inline double master_value(double x, double m_bar, double t,
                           const AgentType& agent, const ValueExponent& rho,
                           double horizon_t) {
  if (rho.setting != ValueSetting::CaraMeanField)
    throw DomainError("master-equation value requires a CARA mean-field exponent");
  if (!(horizon_t > 0.0)) throw DomainError("horizon T must be > 0");
  if (!(t >= 0.0 && t <= horizon_t))
    throw DomainError("t must lie in [0,T]");
  return -std::exp(-(x - agent.theta * m_bar) / agent.delta -
                   rho.rho * (horizon_t - t));
}

// ---------------------------------------------------------------------------
// Effective risk tolerance (single stock)
// ---------------------------------------------------------------------------

struct CompetitionProfile {
  double delta_eff = 0.0;
  std::optional<double> k;               // CRRA only
  std::optional<double> theta_bar_crit;  // CRRA, only when theta*delta_bar > 1
};

/// Single-stock effective risk tolerance of an agent facing population d:
/// the equilibrium strategy equals delta_eff * mu / sigma^2.
inline CompetitionProfile competition_profile(ModelKind kind,
                                              const AgentType& agent,
                                              const TypeDistribution& d) {
  validate_type(agent, kind);
  validate_distribution(d, kind);
  if (agent.nu != 0.0)
    throw DomainError("single-stock profile requires nu = 0");
  for (const WeightedType& a : d.atoms) {
    if (a.type.nu != 0.0)
      throw DomainError("single-stock profile requires nu = 0 on every atom");
    if (a.type.mu != agent.mu || a.type.sigma != agent.sigma)
      throw DomainError("single-stock profile requires common (mu, sigma)");
  }
  if (!(agent.sigma > 0.0))
    throw DomainError("single-stock profile requires sigma > 0");

  const double delta_bar = expect(d, [](const AgentType& a) { return a.delta; });

  if (kind == ModelKind::Cara) {
    const double theta_bar = expect(d, [](const AgentType& a) { return a.theta; });
    if (!(theta_bar < 1.0))
      throw DomainError("average theta must be < 1");
    return CompetitionProfile{
        agent.delta + agent.theta * delta_bar / (1.0 - theta_bar),
        std::nullopt, std::nullopt};
  }

  const double theta_delta_bar =
      expect(d, [](const AgentType& a) { return a.theta * (a.delta - 1.0); });
  const double k = delta_bar / (1.0 + theta_delta_bar);
  CompetitionProfile out{(1.0 - k * agent.theta) * agent.delta + k * agent.theta,
                         k, std::nullopt};
  if (agent.theta * delta_bar > 1.0 && delta_bar != 1.0)
    out.theta_bar_crit = (agent.theta * delta_bar - 1.0) / (delta_bar - 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Fixed-point aggregate oracle
// ---------------------------------------------------------------------------

struct Divergent {
  std::uint64_t iterations = 0;
};

struct FixedPointOptions {
  std::uint64_t max_iter = 1'000'000;
  double tol = 1e-14;
};

using FixedPointResult = std::variant<Aggregates, Divergent>;

namespace detail {

// Iterates s -> mean(sigma_i * best_response_i(s)) from s = 0. Independent of
// the closed-form solvers: the limit aggregate is found by iteration, and the
// reported (phi, psi) are read off the affine response map itself.
template <typename ResponseAggregate>
inline FixedPointResult iterate_aggregate(ResponseAggregate&& map, bool cara,
                                          const FixedPointOptions& opt) {
  double s = 0.0;
  bool converged = false;
  for (std::uint64_t it = 0; it < opt.max_iter; ++it) {
    const double next = map(s);
    if (!std::isfinite(next)) return Divergent{it + 1};
    if (std::abs(next - s) <= opt.tol) {
      s = next;
      converged = true;
      break;
    }
    s = next;
  }
  if (!converged) return Divergent{opt.max_iter};

  Aggregates agg;
  agg.phi = map(0.0);
  const double slope = map(1.0) - agg.phi;
  agg.psi = cara ? slope : -slope;
  agg.aggregate_vol = s;
  return agg;
}

}  // namespace detail

inline FixedPointResult fixed_point_oracle(ModelKind kind, const Population& p,
                                           FixedPointOptions opt = {}) {
  validate_population(p, kind);
  const std::size_t n = p.size();
  auto map = [&](double s) {
    double acc = 0.0;
    for (const AgentType& a : p.agents)
      acc += a.sigma * (kind == ModelKind::Cara ? cara_strategy(a, s, n)
                                                : crra_strategy(a, s, n));
    return acc / static_cast<double>(n);
  };
  return detail::iterate_aggregate(map, kind == ModelKind::Cara, opt);
}

inline FixedPointResult fixed_point_oracle(ModelKind kind,
                                           const TypeDistribution& d,
                                           FixedPointOptions opt = {}) {
  validate_distribution(d, kind);
  auto map = [&](double s) {
    return expect(d, [&](const AgentType& a) {
      return a.sigma * (kind == ModelKind::Cara ? cara_strategy(a, s)
                                                : crra_strategy(a, s));
    });
  };
  return detail::iterate_aggregate(map, kind == ModelKind::Cara, opt);
}

}  // namespace relperf
