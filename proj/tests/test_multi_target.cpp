#include <gtest/gtest.h>

#include <random>

#include "mimoplace/fim_crlb.hpp"
#include "mimoplace/multi_target.hpp"
#include "mimoplace/signal_model.hpp"
#include "mimoplace/single_target_sdp.hpp"

using namespace mimoplace;

namespace {

Scenario two_targets(int m) {
  Scenario s;
  s.array = ArrayGeometry::transceiver(std::vector<Vec2>(static_cast<std::size_t>(m)));
  s.targets = {{28, -kPi / 3, 0.33, 3.0, 3.0}, {28, kPi / 3, 0.66, 3.0, 3.0}};
  return s;
}

Scenario one_target(int m) {
  Scenario s;
  s.array = ArrayGeometry::transceiver(std::vector<Vec2>(static_cast<std::size_t>(m)));
  s.targets = {target_at({410.0, -710.0}, 3.0, 3.0, s.radar)};
  return s;
}

}  // namespace

TEST(RandomGeometry, FeasibleAndCentred) {
  std::mt19937_64 rng(1);
  for (auto shape : {ArrayGeometry::transceiver(std::vector<Vec2>(3)), ArrayGeometry::transceiver(std::vector<Vec2>(4)),
                     ArrayGeometry::separate(std::vector<Vec2>(2), std::vector<Vec2>(3))}) {
    for (int i = 0; i < 100; ++i) {
      const auto g = random_feasible_geometry(shape, {}, rng);
      EXPECT_LE(max_ring_violation(g, constrained_pairs(g, {})), 1e-9);
      EXPECT_LT(joint_centroid_sum(g).norm(), 1e-12);
    }
  }
}

TEST(Cost, SingularGeometryThrowsButGuardedCostIsFinite) {
  auto s = two_targets(2);
  s.array = ArrayGeometry::transceiver({{0.0, 0.0}, {0.0, 0.0}});
  EXPECT_THROW(placement_cost(s), SingularFim);
  EXPECT_TRUE(std::isinf(final_cost(s, CostMetric::kTrace)));
  EXPECT_TRUE(std::isfinite(guarded_cost(s, CostMetric::kTrace)));
}

TEST(Cost, MetricsReadTheReport) {
  auto s = one_target(3);
  std::mt19937_64 rng(3);
  s.array = random_feasible_geometry(s.array, s.constraints, rng);
  const auto rep = state_fim_and_crlb(s);
  EXPECT_EQ(placement_cost(s, CostMetric::kTrace), rep.metrics.trace);
  EXPECT_EQ(placement_cost(s, CostMetric::kDet), rep.metrics.det);
  EXPECT_EQ(placement_cost(s, CostMetric::kMaxEig), rep.metrics.max_eig);
  EXPECT_EQ(placement_cost(s, CostMetric::kPositionTrace), rep.position_trace);
}

TEST(LocalOptimize, StaysFeasibleAndImproves) {
  const auto s = one_target(3);
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const auto init = random_feasible_geometry(s.array, s.constraints, rng);
    Scenario at = s;
    at.array = init;
    const double c0 = placement_cost(at);
    const auto r = local_optimize(s, init);
    ASSERT_TRUE(r.feasible);
    EXPECT_LE(max_ring_violation(r.geometry, constrained_pairs(r.geometry, s.constraints)), 1e-8);
    EXPECT_LE(r.cost, c0 * (1 + 1e-12));
  }
}

TEST(LocalOptimize, InfeasibleStartIsRepaired) {
  const auto s = two_targets(3);
  const auto r = local_optimize(s, ArrayGeometry::transceiver({{0.0, 0.0}, {0.01, 0.0}, {0.0, 0.02}}));
  EXPECT_TRUE(r.feasible);
  EXPECT_TRUE(std::isfinite(r.cost));
}

TEST(Sampler, SingleTargetMatchesRelaxation) {
  const auto s = one_target(3);
  auto at = s;
  at.array = place_single_target(s).geometry;
  const double sdp_cost = placement_cost(at);
  SamplerConfig cfg;
  cfg.seed = 4;
  const auto sol = sample_restart_optimize(s, cfg);
  EXPECT_NEAR(sol.cost, sdp_cost, 1e-4 * sdp_cost);
}

TEST(Sampler, SeedReproducibleAndTraceMonotone) {
  const auto s = two_targets(3);
  SamplerConfig cfg;
  cfg.seed = 77;
  cfg.restart_budget = 8;
  OptimizerTrace t1, t2;
  const auto a = sample_restart_optimize(s, cfg, &t1);
  const auto b = sample_restart_optimize(s, cfg, &t2);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_EQ(a.geometry.tx, b.geometry.tx);
  ASSERT_EQ(t1.records.size(), t2.records.size());
  EXPECT_LE(a.restarts, cfg.restart_budget);
  for (std::size_t i = 1; i < t1.best_so_far.size(); ++i) EXPECT_LE(t1.best_so_far[i], t1.best_so_far[i - 1]);
  EXPECT_EQ(t1.best_so_far.back(), a.cost);
  int accepted = 0;
  for (std::size_t i = 1; i < t1.records.size(); ++i) accepted += t1.records[i].accepted;
  EXPECT_EQ(accepted, a.accepted);
  EXPECT_LE(max_ring_violation(a.geometry, constrained_pairs(a.geometry, s.constraints)), 1e-8);
}

TEST(Sampler, PatienceStopsEarly) {
  const auto s = one_target(2);
  SamplerConfig cfg;
  cfg.patience = 2;
  cfg.restart_budget = 50;
  const auto sol = sample_restart_optimize(s, cfg);
  EXPECT_EQ(sol.status, "patience");
  EXPECT_LT(sol.restarts, 50);
}

TEST(Sampler, RejectsBadConfig) {
  SamplerConfig cfg;
  cfg.restart_budget = 0;
  EXPECT_THROW(sample_restart_optimize(one_target(2), cfg), InvalidScenario);
  cfg.restart_budget = 5;
  cfg.restart_cov << 1, 2, 2, 1;
  EXPECT_THROW(sample_restart_optimize(one_target(2), cfg), InvalidScenario);
}

TEST(Sampler, UnidentifiableModelFailsEveryRestart) {
  Scenario s;
  s.array = ArrayGeometry::separate(std::vector<Vec2>(1), std::vector<Vec2>(1));
  s.targets = {{28, 0.1, 0.3, 1, 0}, {28, 0.9, 0.6, 1, 0}};
  SamplerConfig cfg;
  cfg.restart_budget = 2;
  cfg.patience = 2;
  EXPECT_THROW(sample_restart_optimize(s, cfg), AllRestartsFailed);
}

TEST(SeparationBound, UpperEndHoldsOnRandomGeometries) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  RadarConfig r;
  const double k = wavenumber(r);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto shape = i % 2 ? ArrayGeometry::transceiver(std::vector<Vec2>(3))
                             : ArrayGeometry::separate(std::vector<Vec2>(2), std::vector<Vec2>(2));
    const auto g = random_feasible_geometry(shape, {}, rng);
    const double t1 = angle(rng), t2 = angle(rng);
    const auto [lo, hi] = omega_separation_interval(t2 - t1, 0.3, 0.6, r.wavelength_m);
    EXPECT_LE(lo, hi);
    const auto om = omega_matrix(g, r);
    for (Eigen::Index l = 0; l < om.cols(); ++l) {
      const double w1 = k * look_vector(t1).dot(om.col(l)), w2 = k * look_vector(t2).dot(om.col(l));
      if (std::abs(w1 - w2) > hi * (1 + 1e-12)) ++violations;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(SeparationBound, Endpoints) {
  const auto [lo0, hi0] = omega_separation_interval(0.0, 0.3, 0.6, 0.3);
  EXPECT_EQ(lo0, 0.0);
  EXPECT_EQ(hi0, 0.0);
  const auto [lo, hi] = omega_separation_interval(kPi, 0.3, 0.6, 0.3);
  EXPECT_NEAR(lo, 2 * kPi / 0.3 * 0.3 * 2, 1e-12);
  EXPECT_NEAR(hi, 2 * kPi / 0.3 * 0.6 * 2, 1e-12);
}
