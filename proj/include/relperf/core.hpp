#pragma once

// Domain types for competitive portfolio games: agent type vectors, finite
// populations, and discrete type distributions, plus the include-self /
// exclude-self reparametrizations of the competition term.

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace relperf {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BracketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ModelKind { Cara, Crra };

inline const char* to_string(ModelKind kind) {
  return kind == ModelKind::Cara ? "cara" : "crra";
}

/// One agent's type vector: initial wealth, risk tolerance, competition
/// weight, stock drift, idiosyncratic volatility, common-noise volatility.
struct AgentType {
  double x0 = 0.0;
  double delta = 1.0;
  double theta = 0.0;
  double mu = 1.0;
  double nu = 0.0;
  double sigma = 0.0;

  double total_variance() const { return sigma * sigma + nu * nu; }
};

/// Ordered finite list of agents; the n-agent game.
struct Population {
  std::vector<AgentType> agents;

  std::size_t size() const { return agents.size(); }
};

/// One atom of a discrete type law.
struct WeightedType {
  AgentType type;
  double weight = 0.0;
};

/// Discrete type distribution: strictly positive weights summing to 1.
struct TypeDistribution {
  std::vector<WeightedType> atoms;

  std::size_t size() const { return atoms.size(); }
};

/// The single-stock market: every agent trades the same stock (nu = 0).
struct SingleStockSpec {
  double mu = 1.0;
  double sigma = 1.0;
};

inline constexpr double kWeightSumTol = 1e-12;

inline void validate_type(const AgentType& t, ModelKind kind) {
  if (!(t.delta > 0.0) || !std::isfinite(t.delta))
    throw DomainError("delta must be > 0");
  if (!(t.theta >= 0.0 && t.theta <= 1.0))
    throw DomainError("theta must be in [0,1]");
  if (!(t.mu > 0.0) || !std::isfinite(t.mu))
    throw DomainError("mu must be > 0");
  if (!(t.nu >= 0.0) || !std::isfinite(t.nu))
    throw DomainError("nu must be >= 0");
  if (!(t.sigma >= 0.0) || !std::isfinite(t.sigma))
    throw DomainError("sigma must be >= 0");
  if (!(t.sigma + t.nu > 0.0))
    throw DomainError("sigma+nu must be > 0");
  if (!std::isfinite(t.x0))
    throw DomainError("x0 must be finite");
  if (kind == ModelKind::Crra && !(t.x0 > 0.0))
    throw DomainError("x0 must be > 0 under CRRA");
}

inline void validate_single_stock(const SingleStockSpec& s) {
  if (!(s.mu > 0.0) || !std::isfinite(s.mu))
    throw DomainError("mu must be > 0");
  if (!(s.sigma > 0.0) || !std::isfinite(s.sigma))
    throw DomainError("sigma must be > 0");
}

inline void validate_population(const Population& p, ModelKind kind) {
  if (p.agents.empty())
    throw DomainError("population must contain at least one agent");
  for (const AgentType& a : p.agents) validate_type(a, kind);
}

inline void validate_distribution(const TypeDistribution& d, ModelKind kind) {
  if (d.atoms.empty())
    throw DomainError("type distribution must contain at least one atom");
  double total = 0.0;
  for (const WeightedType& a : d.atoms) {
    if (!(a.weight > 0.0) || !std::isfinite(a.weight))
      throw DomainError("atom weights must be > 0");
    validate_type(a.type, kind);
    total += a.weight;
  }
  if (std::abs(total - 1.0) > kWeightSumTol)
    throw DomainError("atom weights must sum to 1 within 1e-12");
}

/// Point mass at a single type.
inline TypeDistribution point_mass(const AgentType& t) {
  return TypeDistribution{{WeightedType{t, 1.0}}};
}

/// Maps exclude-self preference parameters (delta', theta') -- where the agent
/// measures performance against the average of the *other* n-1 agents -- to
/// the include-self parameters (delta, theta) that produce the same payoff.
/// The CRRA map is valid only when (1 - 1/delta')(1 + theta'/(n-1)) < 1.
inline std::pair<double, double> reparam_exclude_self(ModelKind kind,
                                                      double delta_prime,
                                                      double theta_prime,
                                                      int n) {
  if (n < 2) throw DomainError("exclude-self map requires n >= 2");
  if (!(delta_prime > 0.0) || !std::isfinite(delta_prime))
    throw DomainError("delta' must be > 0");
  if (!(theta_prime >= 0.0 && theta_prime <= 1.0))
    throw DomainError("theta' must be in [0,1]");

  const double m = static_cast<double>(n);
  const double theta = theta_prime / ((m - 1.0) / m + theta_prime / m);

  double delta = 0.0;
  if (kind == ModelKind::Cara) {
    delta = delta_prime / (1.0 + theta_prime / (m - 1.0));
  } else {
    const double growth =
        (1.0 - 1.0 / delta_prime) * (1.0 + theta_prime / (m - 1.0));
    if (!(growth < 1.0))
      throw DomainError("(1 - 1/delta')(1 + theta'/(n-1)) must be < 1");
    delta = delta_prime /
            (delta_prime - (delta_prime - 1.0) * (1.0 + theta_prime / (m - 1.0)));
  }

  // The map should land inside the include-self parameter ranges; reject
  // rather than clamp if it ever does not.
  if (!(delta > 0.0) || !(theta >= 0.0 && theta <= 1.0))
    throw DomainError("mapped (delta, theta) fall outside the valid ranges");
  return {delta, theta};
}

namespace detail {

inline bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

inline bool same_type_bits(const AgentType& a, const AgentType& b) {
  return same_bits(a.x0, b.x0) && same_bits(a.delta, b.delta) &&
         same_bits(a.theta, b.theta) && same_bits(a.mu, b.mu) &&
         same_bits(a.nu, b.nu) && same_bits(a.sigma, b.sigma);
}

}  // namespace detail

/// Empirical type distribution of a population. Agents whose type vectors are
/// bit-for-bit identical merge into a single atom with weight multiplicity/n;
/// atoms keep first-occurrence order.
inline TypeDistribution empirical_distribution(const Population& p) {
  if (p.agents.empty())
    throw DomainError("population must contain at least one agent");
  TypeDistribution d;
  std::vector<std::size_t> counts;
  for (const AgentType& a : p.agents) {
    bool merged = false;
    for (std::size_t k = 0; k < d.atoms.size(); ++k) {
      if (detail::same_type_bits(d.atoms[k].type, a)) {
        ++counts[k];
        merged = true;
        break;
      }
    }
    if (!merged) {
      d.atoms.push_back(WeightedType{a, 0.0});
      counts.push_back(1);
    }
  }
  const double n = static_cast<double>(p.agents.size());
  for (std::size_t k = 0; k < d.atoms.size(); ++k)
    d.atoms[k].weight = static_cast<double>(counts[k]) / n;
  return d;
}

/// Exact expectation of f(zeta) under a discrete type law.
template <typename F>
inline double expect(const TypeDistribution& d, F&& f) {
  double acc = 0.0;
  for (const WeightedType& a : d.atoms) {
    const double v = f(a.type);
    if (!std::isfinite(v))
      throw NumericError("non-finite value under expectation");
    acc += a.weight * v;
  }
  if (!std::isfinite(acc))
    throw NumericError("non-finite expectation");
  return acc;
}

}  // namespace relperf
