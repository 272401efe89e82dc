#pragma once

// Exact terminal-wealth sampling under constant strategies (no time
// discretization), closed-form payoff evaluation through Gaussian moments,
// Monte Carlo payoff estimation with log-domain accumulation, golden-section
// best-response verification, and the mean-field consistency check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "relperf/core.hpp"
#include "relperf/equilibrium.hpp"
#include "relperf/parallel.hpp"
#include "relperf/rng.hpp"

namespace relperf {

struct SimConfig {
  double horizon_t = 1.0;
  std::int64_t num_paths = 1;
  std::uint64_t seed = 0;
  std::int64_t num_agents_sampled = 1000;  // mean-field population checks
  std::int64_t time_steps = 1;             // path output only
};

inline void validate_sim_config(const SimConfig& c) {
  if (!(c.horizon_t > 0.0) || !std::isfinite(c.horizon_t))
    throw DomainError("horizon T must be > 0");
  if (c.num_paths < 1) throw DomainError("num_paths must be >= 1");
  if (c.num_agents_sampled < 1)
    throw DomainError("num_agents_sampled must be >= 1");
  if (c.time_steps < 1) throw DomainError("time_steps must be >= 1");
}

struct PayoffEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t num_paths = 0;
  double certainty_equivalent = 0.0;
};

/// Terminal wealths, row-major [path][agent].
struct WealthMatrix {
  std::size_t num_paths = 0;
  std::size_t num_agents = 0;
  std::vector<double> values;

  double& at(std::size_t path, std::size_t agent) {
    return values[path * num_agents + agent];
  }
  double at(std::size_t path, std::size_t agent) const {
    return values[path * num_agents + agent];
  }
};

struct StrategyAgent {
  AgentType type;
  double strategy = 0.0;
};

namespace detail {

inline double cara_terminal(const AgentType& a, double pi, double t, double w,
                            double b) {
  return a.x0 + pi * (a.mu * t + a.nu * w + a.sigma * b);
}

inline double crra_log_growth(const AgentType& a, double pi, double t,
                              double w, double b) {
  return (a.mu * pi - 0.5 * a.total_variance() * pi * pi) * t +
         pi * a.nu * w + pi * a.sigma * b;
}

inline void check_finite_wealth(ModelKind kind, const WealthMatrix& m) {
  for (std::size_t p = 0; p < m.num_paths; ++p) {
    for (std::size_t a = 0; a < m.num_agents; ++a) {
      const double x = m.at(p, a);
      if (!std::isfinite(x) || (kind == ModelKind::Crra && !(x > 0.0)))
        throw NumericError("wealth overflow on path " + std::to_string(p));
    }
  }
}

}  // namespace detail

/// Samples terminal wealths exactly from their Gaussian / log-normal laws:
/// W_T^i ~ N(0,T) per agent per path, B_T ~ N(0,T) shared across agents
/// within a path when shared_common_noise is set.
inline WealthMatrix simulate_terminal(ModelKind kind,
                                      const std::vector<StrategyAgent>& agents,
                                      const SimConfig& cfg,
                                      bool shared_common_noise) {
  validate_sim_config(cfg);
  if (agents.empty()) throw DomainError("at least one agent required");
  for (const StrategyAgent& a : agents) {
    validate_type(a.type, kind);
    if (!std::isfinite(a.strategy))
      throw DomainError("strategies must be finite");
  }

  const double t = cfg.horizon_t;
  const double sqrt_t = std::sqrt(t);
  WealthMatrix m{static_cast<std::size_t>(cfg.num_paths), agents.size(), {}};
  m.values.resize(m.num_paths * m.num_agents);

  parallel_for(m.num_paths, [&](std::size_t p) {
    const double b_shared =
        rng::normal(rng::stream_key(cfg.seed, p, rng::kNoAgent,
                                    rng::Role::Common)) *
        sqrt_t;
    for (std::size_t a = 0; a < agents.size(); ++a) {
      const AgentType& type = agents[a].type;
      const double pi = agents[a].strategy;
      const double w =
          rng::normal(rng::stream_key(cfg.seed, p, a, rng::Role::Idiosyncratic)) *
          sqrt_t;
      const double b = shared_common_noise
                           ? b_shared
                           : rng::normal(rng::stream_key(
                                 cfg.seed, p, a, rng::Role::Common)) *
                                 sqrt_t;
      m.at(p, a) = kind == ModelKind::Cara
                       ? detail::cara_terminal(type, pi, t, w, b)
                       : type.x0 * std::exp(detail::crra_log_growth(type, pi,
                                                                    t, w, b));
    }
  });

  detail::check_finite_wealth(kind, m);
  return m;
}

/// Wealth paths on a uniform grid of time_steps exact Gaussian increments
/// (discretization-error-free for these models); row-major
/// [path][step][agent], step j holding the wealth at time (j+1) T/steps.
struct PathMatrix {
  std::size_t num_paths = 0;
  std::size_t num_steps = 0;
  std::size_t num_agents = 0;
  std::vector<double> values;

  double& at(std::size_t path, std::size_t step, std::size_t agent) {
    return values[(path * num_steps + step) * num_agents + agent];
  }
  double at(std::size_t path, std::size_t step, std::size_t agent) const {
    return values[(path * num_steps + step) * num_agents + agent];
  }
};

inline PathMatrix simulate_paths(ModelKind kind,
                                 const std::vector<StrategyAgent>& agents,
                                 const SimConfig& cfg,
                                 bool shared_common_noise) {
  validate_sim_config(cfg);
  if (agents.empty()) throw DomainError("at least one agent required");
  for (const StrategyAgent& a : agents) validate_type(a.type, kind);

  const std::size_t steps = static_cast<std::size_t>(cfg.time_steps);
  const double dt = cfg.horizon_t / static_cast<double>(steps);
  const double sqrt_dt = std::sqrt(dt);
  PathMatrix m{static_cast<std::size_t>(cfg.num_paths), steps, agents.size(), {}};
  m.values.resize(m.num_paths * m.num_steps * m.num_agents);

  parallel_for(m.num_paths, [&](std::size_t p) {
    std::vector<double> state(agents.size());
    for (std::size_t a = 0; a < agents.size(); ++a)
      state[a] = kind == ModelKind::Cara ? agents[a].type.x0
                                         : std::log(agents[a].type.x0);
    for (std::size_t j = 0; j < steps; ++j) {
      const double db_shared =
          rng::normal(rng::stream_key(cfg.seed, p, rng::kNoAgent,
                                      rng::Role::Common, j + 1)) *
          sqrt_dt;
      for (std::size_t a = 0; a < agents.size(); ++a) {
        const AgentType& type = agents[a].type;
        const double pi = agents[a].strategy;
        const double dw = rng::normal(rng::stream_key(
                              cfg.seed, p, a, rng::Role::Idiosyncratic, j + 1)) *
                          sqrt_dt;
        const double db = shared_common_noise
                              ? db_shared
                              : rng::normal(rng::stream_key(
                                    cfg.seed, p, a, rng::Role::Common, j + 1)) *
                                    sqrt_dt;
        if (kind == ModelKind::Cara) {
          state[a] += pi * (type.mu * dt + type.nu * dw + type.sigma * db);
          m.at(p, j, a) = state[a];
        } else {
          state[a] += detail::crra_log_growth(type, pi, dt, dw, db);
          m.at(p, j, a) = std::exp(state[a]);
        }
      }
    }
  });
  return m;
}

// ---------------------------------------------------------------------------
// Exact payoffs
// ---------------------------------------------------------------------------

struct GaussianMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Gaussian law of agent i's relative-performance composite under constant
/// strategies: X_T^i - theta_i Xbar_T (CARA, arithmetic mean) or
/// log(X_T^i Xbar_T^{-theta_i}) (CRRA, geometric mean).
inline GaussianMoments payoff_moments(ModelKind kind, std::size_t i,
                                      const Population& p,
                                      const std::vector<double>& strategies,
                                      double horizon_t) {
  validate_population(p, kind);
  if (strategies.size() != p.size())
    throw DomainError("strategies must match the population size");
  if (i >= p.size()) throw DomainError("agent index out of range");
  if (!(horizon_t > 0.0)) throw DomainError("horizon T must be > 0");

  const std::size_t n = p.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const AgentType& self = p.agents[i];
  const double theta = self.theta;

  double mean_level = 0.0;      // mean of the population average term
  double mean_sigma_pi = 0.0;   // mean(sigma_k pi_k)
  double idio = 0.0;            // sum of squared W-coefficients, k != i
  for (std::size_t k = 0; k < n; ++k) {
    const AgentType& a = p.agents[k];
    const double pi = strategies[k];
    const double level =
        kind == ModelKind::Cara
            ? a.x0 + pi * a.mu * horizon_t
            : std::log(a.x0) + (a.mu * pi - 0.5 * a.total_variance() * pi * pi) *
                                   horizon_t;
    mean_level += inv_n * level;
    mean_sigma_pi += inv_n * a.sigma * pi;
    if (k != i) {
      const double c = theta * inv_n * a.nu * pi;
      idio += c * c;
    }
  }

  const double pi_i = strategies[i];
  const double own_level =
      kind == ModelKind::Cara
          ? self.x0 + pi_i * self.mu * horizon_t
          : std::log(self.x0) +
                (self.mu * pi_i - 0.5 * self.total_variance() * pi_i * pi_i) *
                    horizon_t;
  const double own_idio = self.nu * pi_i * (1.0 - theta * inv_n);
  const double common = self.sigma * pi_i - theta * mean_sigma_pi;

  GaussianMoments g;
  g.mean = own_level - theta * mean_level;
  g.variance = horizon_t * (idio + own_idio * own_idio + common * common);
  return g;
}

/// Closed-form expected payoff of agent i under constant strategies.
inline double exact_payoff(ModelKind kind, std::size_t i, const Population& p,
                           const std::vector<double>& strategies,
                           double horizon_t) {
  const GaussianMoments g = payoff_moments(kind, i, p, strategies, horizon_t);
  const double delta = p.agents[i].delta;
  if (kind == ModelKind::Cara)
    return -std::exp(-g.mean / delta + g.variance / (2.0 * delta * delta));
  if (delta == 1.0) return g.mean;
  const double q = 1.0 - 1.0 / delta;
  return std::exp(q * g.mean + q * q * g.variance / 2.0) / q;
}

namespace detail {

// Strictly concave transform of the payoff with the same argmax over the
// deviating constant strategy; exactly quadratic in the deviation.
inline double payoff_objective(ModelKind kind, std::size_t i,
                               const Population& p,
                               const std::vector<double>& strategies,
                               double horizon_t) {
  const GaussianMoments g = payoff_moments(kind, i, p, strategies, horizon_t);
  const double delta = p.agents[i].delta;
  if (kind == ModelKind::Cara)
    return g.mean / delta - g.variance / (2.0 * delta * delta);
  if (delta == 1.0) return g.mean;
  const double q = 1.0 - 1.0 / delta;
  return g.mean + q * g.variance / 2.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Golden-section best response
// ---------------------------------------------------------------------------

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
};

namespace detail {

/// Maximizes a strictly concave function by golden-section search, then
/// refines by one exact parabolic step (the payoff objectives are quadratic
/// in the deviation, so the refinement is exact up to roundoff). Throws
/// BracketError when the maximum sits at the bracket boundary.
template <typename F>
inline double maximize_concave(F&& f, Bracket br, double tol) {
  if (!(br.lo < br.hi)) throw DomainError("bracket must satisfy lo < hi");
  if (!(tol > 0.0)) throw DomainError("tol must be > 0");

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = br.lo, b = br.hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  double x = 0.5 * (a + b);

  const double margin = 4.0 * tol + 1e-9 * (br.hi - br.lo);
  if (x - br.lo <= margin || br.hi - x <= margin)
    throw BracketError("maximum at the bracket boundary; bracket too small");

  // Parabolic refinement. The payoff objectives are exactly quadratic in the
  // deviation, so a three-point vertex solve is exact up to roundoff; a
  // second pass re-probes at the spacing that balances the value magnitude
  // against the curvature, which conditions the vertex formula well even for
  // large, flat objectives.
  const double f0 = f(x);
  double d = std::max(1.0, 1e-3 * (br.hi - br.lo));
  for (int pass = 0; pass < 2; ++pass) {
    const double fp = f(x + d);
    const double fm = f(x - d);
    const double curvature = fp - 2.0 * f0 + fm;
    if (!(curvature < 0.0)) break;
    const double vertex = x - 0.5 * d * (fp - fm) / curvature;
    if (vertex > br.lo && vertex < br.hi &&
        f(vertex) >= f0 - 1e-12 * std::max(1.0, std::abs(f0)))
      x = vertex;
    const double second_derivative = -curvature / (d * d);
    const double better =
        std::sqrt(std::max(1.0, std::abs(f0)) / second_derivative);
    if (better <= d) break;
    d = std::min(better, 1e8);
  }
  return x;
}

}  // namespace detail

/// Argmax over constant deviations pi of agent i's exact payoff, the other
/// strategies held fixed. With no explicit bracket, starts from
/// [-10|pi_i|-10, 10|pi_i|+10] around the candidate strategies[i] and widens
/// geometrically up to 3 times if the maximum hits the boundary.
inline double best_response(ModelKind kind, std::size_t i, const Population& p,
                            const std::vector<double>& strategies,
                            double horizon_t,
                            std::optional<Bracket> bracket = std::nullopt,
                            double tol = 1e-8) {
  if (i >= p.size()) throw DomainError("agent index out of range");
  if (strategies.size() != p.size())
    throw DomainError("strategies must match the population size");

  std::vector<double> work = strategies;
  auto objective = [&](double pi) {
    work[i] = pi;
    return detail::payoff_objective(kind, i, p, work, horizon_t);
  };

  if (bracket) return detail::maximize_concave(objective, *bracket, tol);

  const double cand = std::abs(strategies[i]);
  Bracket br{-10.0 * cand - 10.0, 10.0 * cand + 10.0};
  for (int attempt = 0;; ++attempt) {
    try {
      return detail::maximize_concave(objective, br, tol);
    } catch (const BracketError&) {
      if (attempt >= 3) throw;
      const double half = 4.0 * 0.5 * (br.hi - br.lo);
      const double mid = 0.5 * (br.lo + br.hi);
      br = Bracket{mid - half, mid + half};
    }
  }
}

// ---------------------------------------------------------------------------
// Mean-field aggregate law and representative-agent best response
// ---------------------------------------------------------------------------

/// Closed-form coefficients of the conditional aggregate wealth process:
/// CARA  Xbar_t     = intercept + drift t + vol B_t,
/// CRRA  log Xbar_t = intercept + drift t + vol B_t,
/// with eta the drift of the geometric aggregate itself (CRRA) or of the
/// arithmetic aggregate (CARA).
struct AggregateLaw {
  double intercept = 0.0;
  double drift = 0.0;
  double vol = 0.0;
  double eta = 0.0;
};

inline AggregateLaw aggregate_law(ModelKind kind, const TypeDistribution& d,
                                  const EquilibriumResult& mfe) {
  validate_distribution(d, kind);
  if (mfe.setting != Setting::MeanField || mfe.kind != kind ||
      mfe.strategies.size() != d.size())
    throw DomainError("equilibrium does not match the distribution");

  AggregateLaw law;
  double mu_pi = 0.0;
  double var_pi_sq = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const AgentType& t = d.atoms[k].type;
    const double w = d.atoms[k].weight;
    const double pi = mfe.strategies[k];
    law.intercept += w * (kind == ModelKind::Cara ? t.x0 : std::log(t.x0));
    law.vol += w * t.sigma * pi;
    mu_pi += w * t.mu * pi;
    var_pi_sq += w * t.total_variance() * pi * pi;
  }
  if (kind == ModelKind::Cara) {
    law.drift = mu_pi;
    law.eta = mu_pi;
  } else {
    law.drift = mu_pi - 0.5 * var_pi_sq;
    law.eta = mu_pi - 0.5 * (var_pi_sq - law.vol * law.vol);
  }
  return law;
}

/// Best response of a representative agent of the given type against a fixed
/// conditional aggregate law.
inline double mfe_best_response(ModelKind kind, const AgentType& agent,
                                const AggregateLaw& law, double horizon_t,
                                std::optional<Bracket> bracket = std::nullopt,
                                double candidate = 0.0, double tol = 1e-8) {
  validate_type(agent, kind);
  if (!(horizon_t > 0.0)) throw DomainError("horizon T must be > 0");

  auto objective = [&](double pi) {
    double mean, variance;
    const double common = agent.sigma * pi - agent.theta * law.vol;
    variance = horizon_t * (pi * pi * agent.nu * agent.nu + common * common);
    if (kind == ModelKind::Cara) {
      mean = (agent.x0 - agent.theta * law.intercept) +
             (pi * agent.mu - agent.theta * law.drift) * horizon_t;
      return mean / agent.delta -
             variance / (2.0 * agent.delta * agent.delta);
    }
    mean = (std::log(agent.x0) - agent.theta * law.intercept) +
           ((agent.mu * pi - 0.5 * agent.total_variance() * pi * pi) -
            agent.theta * law.drift) *
               horizon_t;
    if (agent.delta == 1.0) return mean;
    const double q = 1.0 - 1.0 / agent.delta;
    return mean + q * variance / 2.0;
  };

  if (bracket) return detail::maximize_concave(objective, *bracket, tol);
  Bracket br{-10.0 * std::abs(candidate) - 10.0,
             10.0 * std::abs(candidate) + 10.0};
  for (int attempt = 0;; ++attempt) {
    try {
      return detail::maximize_concave(objective, br, tol);
    } catch (const BracketError&) {
      if (attempt >= 3) throw;
      const double half = 4.0 * 0.5 * (br.hi - br.lo);
      const double mid = 0.5 * (br.lo + br.hi);
      br = Bracket{mid - half, mid + half};
    }
  }
}

// ---------------------------------------------------------------------------
// Monte Carlo payoff estimation
// ---------------------------------------------------------------------------

namespace detail {

struct LogMoments {
  double log_mean_abs = 0.0;  // log of the mean of |values|
  double variance = 0.0;      // sample variance of |values|
};

// Sample mean and variance of exp(z_p), accumulated in the log domain.
inline LogMoments log_domain_moments(const std::vector<double>& z) {
  const std::size_t n = z.size();
  double zmax = -std::numeric_limits<double>::infinity();
  for (double v : z) zmax = std::max(zmax, v);
  double sum1 = 0.0, sum2 = 0.0;
  for (double v : z) {
    sum1 += std::exp(v - zmax);
    sum2 += std::exp(2.0 * (v - zmax));
  }
  const double log_n = std::log(static_cast<double>(n));
  LogMoments out;
  out.log_mean_abs = zmax + std::log(sum1) - log_n;
  if (n > 1) {
    // var = (E[Y^2] - E[Y]^2) n/(n-1), with Y = exp(z)
    const double ex2 = std::exp(2.0 * zmax + std::log(sum2) - log_n);
    const double mean = std::exp(out.log_mean_abs);
    out.variance =
        std::max(0.0, (ex2 - mean * mean) * static_cast<double>(n) /
                          static_cast<double>(n - 1));
  }
  return out;
}

}  // namespace detail

/// Monte Carlo estimate of agent i's expected payoff, with shared common
/// noise across agents. CARA/CRRA-power means and standard errors are
/// accumulated in the log domain, which keeps large deviations finite.
inline PayoffEstimate mc_payoff(ModelKind kind, std::size_t i,
                                const Population& p,
                                const std::vector<double>& strategies,
                                const SimConfig& cfg) {
  if (i >= p.size()) throw DomainError("agent index out of range");
  std::vector<StrategyAgent> agents;
  agents.reserve(p.size());
  for (std::size_t k = 0; k < p.size(); ++k)
    agents.push_back({p.agents[k], strategies[k]});
  const WealthMatrix m = simulate_terminal(kind, agents, cfg, true);

  const AgentType& self = p.agents[i];
  const double inv_n = 1.0 / static_cast<double>(p.size());
  const std::size_t paths = m.num_paths;

  std::vector<double> z(paths);
  parallel_for(paths, [&](std::size_t path) {
    if (kind == ModelKind::Cara) {
      double avg = 0.0;
      for (std::size_t k = 0; k < m.num_agents; ++k)
        avg += inv_n * m.at(path, k);
      z[path] = -(m.at(path, i) - self.theta * avg) / self.delta;
    } else {
      double log_avg = 0.0;
      for (std::size_t k = 0; k < m.num_agents; ++k)
        log_avg += inv_n * std::log(m.at(path, k));
      z[path] = std::log(m.at(path, i)) - self.theta * log_avg;
    }
  });
  for (double v : z)
    if (!std::isfinite(v)) throw NumericError("non-finite payoff sample");

  PayoffEstimate est;
  est.num_paths = static_cast<std::int64_t>(paths);

  if (kind == ModelKind::Crra && self.delta == 1.0) {
    double sum = 0.0;
    for (double v : z) sum += v;
    const double mean = sum / static_cast<double>(paths);
    double ss = 0.0;
    for (double v : z) ss += (v - mean) * (v - mean);
    const double var = paths > 1 ? ss / static_cast<double>(paths - 1) : 0.0;
    est.mean = mean;
    est.std_error = std::sqrt(var / static_cast<double>(paths));
    est.certainty_equivalent = std::exp(mean);
    return est;
  }

  if (kind == ModelKind::Crra) {
    const double q = 1.0 - 1.0 / self.delta;
    for (double& v : z) v *= q;
    const detail::LogMoments lm = detail::log_domain_moments(z);
    est.mean = std::exp(lm.log_mean_abs) / q;
    est.std_error =
        std::sqrt(lm.variance / static_cast<double>(paths)) / std::abs(q);
    est.certainty_equivalent = std::exp(lm.log_mean_abs / q);
  } else {
    const detail::LogMoments lm = detail::log_domain_moments(z);
    est.mean = -std::exp(lm.log_mean_abs);
    est.std_error = std::sqrt(lm.variance / static_cast<double>(paths));
    est.certainty_equivalent = -self.delta * lm.log_mean_abs;
  }
  if (!std::isfinite(est.mean))
    throw NumericError("non-finite Monte Carlo accumulation");
  return est;
}

// ---------------------------------------------------------------------------
// Mean-field consistency check
// ---------------------------------------------------------------------------

struct ConsistencyReport {
  AggregateLaw law;                    // closed-form coefficients
  double common_draw = 0.0;            // the shared B_T value
  double closed_form_aggregate = 0.0;  // law evaluated at (T, B_T)
  double simulated_aggregate = 0.0;    // cross-agent (log-)mean at T
  double cross_agent_std_error = 0.0;
  double empirical_max_discrepancy = 0.0;
  std::int64_t num_agents = 0;
  bool passed = false;
};

/// Simulates num_agents_sampled agents (types i.i.d. from d, independent
/// idiosyncratic noises, one shared common-noise draw) under the MFE
/// strategies and compares the population aggregate with the closed-form
/// conditional aggregate on the same draw.
inline ConsistencyReport mfe_consistency_check(ModelKind kind,
                                               const TypeDistribution& d,
                                               const EquilibriumResult& mfe,
                                               const SimConfig& cfg) {
  validate_sim_config(cfg);
  ConsistencyReport rep;
  rep.law = aggregate_law(kind, d, mfe);
  rep.num_agents = cfg.num_agents_sampled;

  const double t = cfg.horizon_t;
  const double sqrt_t = std::sqrt(t);
  const double b =
      rng::normal(rng::stream_key(cfg.seed, 0, rng::kNoAgent,
                                  rng::Role::Common)) *
      sqrt_t;
  rep.common_draw = b;
  rep.closed_form_aggregate = rep.law.intercept + rep.law.drift * t +
                              rep.law.vol * b;

  std::vector<double> cum(d.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    acc += d.atoms[k].weight;
    cum[k] = acc;
  }
  cum.back() = 1.0;

  const std::size_t n = static_cast<std::size_t>(cfg.num_agents_sampled);
  std::vector<double> sample(n);
  parallel_for(n, [&](std::size_t j) {
    const double u =
        rng::unit(rng::stream_key(cfg.seed, j, rng::kNoAgent,
                                  rng::Role::TypeDraw));
    std::size_t k = 0;
    while (k + 1 < cum.size() && u > cum[k]) ++k;
    const AgentType& type = d.atoms[k].type;
    const double pi = mfe.strategies[k];
    const double w =
        rng::normal(rng::stream_key(cfg.seed, 0, j, rng::Role::Idiosyncratic)) *
        sqrt_t;
    sample[j] = kind == ModelKind::Cara
                    ? detail::cara_terminal(type, pi, t, w, b)
                    : std::log(type.x0) +
                          detail::crra_log_growth(type, pi, t, w, b);
  });

  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : sample) ss += (v - mean) * (v - mean);
  const double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;

  rep.simulated_aggregate = mean;
  rep.cross_agent_std_error = std::sqrt(var / static_cast<double>(n));
  rep.empirical_max_discrepancy = std::abs(mean - rep.closed_form_aggregate);
  const double slack =
      64.0 * std::numeric_limits<double>::epsilon() *
      std::max(1.0, std::abs(rep.closed_form_aggregate));
  rep.passed = rep.empirical_max_discrepancy <=
               4.0 * rep.cross_agent_std_error + slack;
  return rep;
}

}  // namespace relperf
