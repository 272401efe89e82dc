#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "relperf/convergence.hpp"
#include "test_support.hpp"

using namespace relperf;

TEST_CASE("population sampling") {
  const AgentType z1{0, 1, 0.3, 1, 0.5, 0.5};
  const AgentType z2{0, 2, 0.3, 1, 0.5, 0.5};

  SECTION("point mass replicates the atom") {
    const Population p = sample_population(point_mass(z1), 17, 4);
    REQUIRE(p.size() == 17);
    for (const AgentType& a : p.agents) CHECK(a.delta == 1.0);
  }
  SECTION("frequencies concentrate around the weights") {
    TypeDistribution d{{{z1, 0.5}, {z2, 0.5}}};
    std::vector<std::size_t> atoms;
    sample_population(d, 10000, 12, &atoms);
    double freq = 0.0;
    for (std::size_t k : atoms) freq += (k == 0) ? 1.0 : 0.0;
    freq /= 10000.0;
    CHECK(std::abs(freq - 0.5) < 0.02);
  }
  SECTION("deterministic given the seed") {
    TypeDistribution d{{{z1, 0.25}, {z2, 0.75}}};
    std::vector<std::size_t> a, b, c;
    sample_population(d, 200, 5, &a);
    sample_population(d, 200, 5, &b);
    sample_population(d, 200, 6, &c);
    CHECK(a == b);
    CHECK(a != c);
  }
  SECTION("replication apportions by largest remainder") {
    TypeDistribution d{{{z1, 0.5}, {z2, 0.25}, {AgentType{0, 3, 0.3, 1, 0.5, 0.5}, 0.25}}};
    std::vector<std::size_t> atoms;
    const Population p = replicate_population(d, 8, &atoms);
    REQUIRE(p.size() == 8);
    std::vector<int> counts(3, 0);
    for (std::size_t k : atoms) ++counts[k];
    CHECK(counts[0] == 4);
    CHECK(counts[1] == 2);
    CHECK(counts[2] == 2);
  }
}

TEST_CASE("replicated-type study isolates the 1/n correction") {
  const AgentType z{1, 2, 0.6, 1, 0.8, 1};
  const std::vector<std::int64_t> ns{8, 16, 32, 64};

  for (ModelKind kind : {ModelKind::Cara, ModelKind::Crra}) {
    const ConvergenceTable t = convergence_study(
        kind, point_mass(z), ns, 3, 1, ConvergenceMode::ReplicatedType);
    REQUIRE(t.rows.size() == ns.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      CHECK(t.rows[i].failures == 0);
      CHECK(t.rows[i].max_abs_error > 0.0);
      if (i > 0) CHECK(t.rows[i].max_abs_error < t.rows[i - 1].max_abs_error);
    }
    for (std::size_t i = 0; i + 1 < t.rows.size(); ++i) {
      const double ratio = t.rows[i].mean_abs_error / t.rows[i + 1].mean_abs_error;
      CHECK(ratio > 1.6);
      CHECK(ratio < 2.4);
    }
  }
}

TEST_CASE("single-stock replication is exact") {
  TypeDistribution d{{{AgentType{1, 2, 0.4, 1, 0, 1}, 0.5},
                      {AgentType{1, 0.7, 0.6, 1, 0, 1}, 0.5}}};
  const std::vector<std::int64_t> ns{2, 4, 8, 16};
  for (ModelKind kind : {ModelKind::Cara, ModelKind::Crra}) {
    const ConvergenceTable t =
        convergence_study(kind, d, ns, 1, 1, ConvergenceMode::ReplicatedType);
    for (const ConvergenceRow& row : t.rows) CHECK(row.max_abs_error <= 1e-12);
  }
}

TEST_CASE("iid sampling error shrinks with n") {
  TypeDistribution d{{{AgentType{0, 1.5, 0.4, 1, 0.6, 0.8}, 0.5},
                      {AgentType{0, 0.8, 0.3, 1.2, 0.5, 0.9}, 0.5}}};
  const ConvergenceTable t =
      convergence_study(ModelKind::Cara, d, {100, 1000, 10000}, 32, 21,
                        ConvergenceMode::IidSampled);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].mean_abs_error > t.rows[1].mean_abs_error);
  CHECK(t.rows[1].mean_abs_error > t.rows[2].mean_abs_error);
  const double beta = fitted_decay_exponent(t);
  CHECK(beta > 0.3);
  CHECK(beta < 0.7);

  const ConvergenceTable again =
      convergence_study(ModelKind::Cara, d, {100, 1000, 10000}, 32, 21,
                        ConvergenceMode::IidSampled);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(t.rows[i].mean_abs_error == again.rows[i].mean_abs_error);
    CHECK(t.rows[i].max_abs_error == again.rows[i].max_abs_error);
  }
}

TEST_CASE("solver failures are counted, not dropped") {
  // Sampling from this law often yields populations with theta = 1 everywhere
  // and no idiosyncratic noise, which have no constant CARA equilibrium.
  TypeDistribution d{{{AgentType{0, 1, 1.0, 1, 0, 1}, 0.95},
                      {AgentType{0, 1, 0.0, 1, 0, 1}, 0.05}}};
  const ConvergenceTable t = convergence_study(
      ModelKind::Cara, d, {4}, 60, 9, ConvergenceMode::IidSampled);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].failures > 0);
  CHECK(t.rows[0].failures < 60);
  CHECK(t.rows[0].replications == 60);
}

TEST_CASE("study input validation") {
  const TypeDistribution d = point_mass(AgentType{0, 1, 0.3, 1, 0.5, 0.5});
  CHECK_THROWS_AS(convergence_study(ModelKind::Cara, d, {8, 8}, 1, 1,
                                    ConvergenceMode::ReplicatedType),
                  DomainError);
  CHECK_THROWS_AS(convergence_study(ModelKind::Cara, d, {16, 8}, 1, 1,
                                    ConvergenceMode::ReplicatedType),
                  DomainError);
  CHECK_THROWS_AS(convergence_study(ModelKind::Cara, d, {}, 1, 1,
                                    ConvergenceMode::ReplicatedType),
                  DomainError);
}
