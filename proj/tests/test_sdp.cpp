#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <random>

#include "mimoplace/fim_crlb.hpp"
#include "mimoplace/multi_target.hpp"
#include "mimoplace/sdp_solver.hpp"
#include "mimoplace/single_target_sdp.hpp"

using namespace mimoplace;

namespace {

Scenario single(ArrayMode mode, int m, int n, double doa, double d = 0.3, double e = 0.6) {
  Scenario s;
  s.array = mode == ArrayMode::kTransceiver
                ? ArrayGeometry::transceiver(std::vector<Vec2>(static_cast<std::size_t>(m)))
                : ArrayGeometry::separate(std::vector<Vec2>(static_cast<std::size_t>(m)),
                                          std::vector<Vec2>(static_cast<std::size_t>(n)));
  s.constraints = PlacementConstraints::uniform(d, e);
  s.targets = {{28, doa, 0.33, 3.0, 3.0}};
  return s;
}

double max_residual(const PlacementSolution& p) {
  return p.rank1_residuals.empty() ? 0.0 : *std::max_element(p.rank1_residuals.begin(), p.rank1_residuals.end());
}

}  // namespace

// ---------------------------------------------------------------------------
// Generic solver

TEST(BlockSdp, MinimumEigenvalueProblem) {
  // min <C, X> s.t. tr X = 1, X psd has value lambda_min(C).
  Eigen::Matrix3d c;
  c << 2, -1, 0, -1, 2, -1, 0, -1, 2;
  SdpData d;
  d.block_sizes = {3};
  d.c = {c};
  d.a = {{{0, Eigen::Matrix3d::Identity()}}};
  d.b = Eigen::VectorXd::Ones(1);
  const auto r = solve_block_sdp(d);
  ASSERT_EQ(r.status, SdpStatus::kOptimal);
  EXPECT_NEAR(r.primal_objective, 2.0 - std::sqrt(2.0), 1e-7);
  EXPECT_NEAR(r.dual_objective, 2.0 - std::sqrt(2.0), 1e-7);
}

TEST(BlockSdp, DiagonalBlocksActAsLinearProgram) {
  // min x1 + 2 x2 s.t. x1 + x2 = 1, x >= 0  ->  1 at x = (1, 0).
  SdpData d;
  d.block_sizes = {1, 1};
  d.c = {Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, 2.0)};
  d.a = {{{0, Eigen::MatrixXd::Ones(1, 1)}, {1, Eigen::MatrixXd::Ones(1, 1)}}};
  d.b = Eigen::VectorXd::Ones(1);
  const auto r = solve_block_sdp(d);
  ASSERT_EQ(r.status, SdpStatus::kOptimal);
  EXPECT_NEAR(r.primal_objective, 1.0, 1e-7);
  EXPECT_NEAR(r.x[1](0, 0), 0.0, 1e-6);
}

TEST(BlockSdp, IterationCapIsReported) {
  Eigen::Matrix2d c;
  c << 1, 0.5, 0.5, 3;
  SdpData d;
  d.block_sizes = {2};
  d.c = {c};
  d.a = {{{0, Eigen::Matrix2d::Identity()}}};
  d.b = Eigen::VectorXd::Ones(1);
  SdpOptions o;
  o.max_iterations = 1;
  EXPECT_EQ(solve_block_sdp(d, o).status, SdpStatus::kMaxIterations);
}

// ---------------------------------------------------------------------------
// Relaxation

TEST(SinglePlacement, SeparateArraysReachAnalyticOptimum) {
  for (auto [m, n] : {std::pair{1, 1}, {2, 2}, {3, 2}, {3, 3}, {4, 4}}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sol = place_single_target(single(ArrayMode::kSeparate, m, n, -kPi / 3));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double want = m * n * 0.36;
    EXPECT_NEAR(sol.relaxation_bound, want, 1e-6 * want) << m << "x" << n;
    EXPECT_GE(sol.achieved_cost, (1.0 - 1e-6) * sol.relaxation_bound);
    EXPECT_LE(max_residual(sol), 1e-6);
    EXPECT_LE(sol.max_violation, 1e-9);
    EXPECT_LT(secs, 1.0);
  }
}

TEST(SinglePlacement, TwoByTwoQuotedValue) {
  const auto sol = place_single_target(single(ArrayMode::kSeparate, 2, 2, 0.4));
  EXPECT_NEAR(sol.relaxation_bound, 1.44, 1.44e-6);
  EXPECT_LE(sol.gap, 1e-6);
}

TEST(SinglePlacement, TransceiverPairIsCollinearAtE) {
  const auto sol = place_single_target(single(ArrayMode::kTransceiver, 2, 2, 0.7));
  EXPECT_NEAR(sol.achieved_cost, 2 * 0.36, 1e-8);
  const Vec2 ds = sol.geometry.tx[0] - sol.geometry.tx[1];
  EXPECT_NEAR(std::abs(look_derivative(0.7).dot(ds)), 0.6, 1e-6);
}

TEST(SinglePlacement, TransceiverThreeBeatsCollinearLayout) {
  const double doa = -kPi / 3;
  const Vec2 p = look_derivative(doa);
  const auto line = ArrayGeometry::transceiver({0.3 * p, Vec2::Zero(), -0.3 * p});
  const double collinear = single_target_objective(line, doa, PlacementConstraints::uniform(0.3, 0.6));
  EXPECT_NEAR(collinear, 1.08, 1e-12);
  const auto sol = place_single_target(single(ArrayMode::kTransceiver, 3, 3, doa));
  EXPECT_GE(sol.achieved_cost, collinear);
  EXPECT_LE(sol.achieved_cost, sol.relaxation_bound * (1 + 1e-9));
  EXPECT_LE(sol.max_violation, 1e-9);
  // Isosceles triangle with sides d, e, e.
  std::vector<double> sides;
  for (auto [a, b] : {std::pair{0, 1}, {0, 2}, {1, 2}}) sides.push_back((sol.geometry.tx[a] - sol.geometry.tx[b]).norm());
  std::sort(sides.begin(), sides.end());
  EXPECT_NEAR(sides[0], 0.3, 1e-6);
  EXPECT_NEAR(sides[1], 0.6, 1e-6);
  EXPECT_NEAR(sides[2], 0.6, 1e-6);
  EXPECT_NEAR(sol.achieved_cost, 1.35, 1e-6);
}

TEST(SinglePlacement, GeometryIsCentredAndFeasible) {
  for (int m : {2, 3, 4, 5}) {
    const auto s = single(ArrayMode::kTransceiver, m, m, 1.1);
    const auto sol = place_single_target(s);
    EXPECT_LT(joint_centroid_sum(sol.geometry).norm(), 1e-9);
    EXPECT_LE(max_ring_violation(sol.geometry, constrained_pairs(sol.geometry, s.constraints)), 1e-9);
    EXPECT_NEAR(single_target_objective(sol.geometry, 1.1, s.constraints), sol.achieved_cost, 1e-12);
  }
}

TEST(SinglePlacement, EqualBoundsFixPairLengths) {
  const auto sol = place_single_target(single(ArrayMode::kSeparate, 1, 2, 0.2, 0.45, 0.45));
  EXPECT_NEAR(sol.achieved_cost, 2 * 0.45 * 0.45, 1e-7);
  for (const auto& r : sol.geometry.rx) EXPECT_NEAR((r - sol.geometry.tx[0]).norm(), 0.45, 1e-7);
}

TEST(SinglePlacement, RotationCovariance) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  for (int trial = 0; trial < 5; ++trial) {
    const double th = angle(rng), shift = angle(rng);
    for (auto mode : {ArrayMode::kTransceiver, ArrayMode::kSeparate}) {
      const auto s1 = single(mode, 3, 3, th), s2 = single(mode, 3, 3, wrap_angle(th + shift));
      const auto a = place_single_target(s1), b = place_single_target(s2);
      EXPECT_NEAR(a.achieved_cost, b.achieved_cost, 1e-6 * a.achieved_cost);
      const auto turned = rotate_solution(a.geometry, shift);
      EXPECT_LE(max_ring_violation(turned, constrained_pairs(turned, s1.constraints)), 1e-9);
      EXPECT_NEAR(single_target_objective(turned, th + shift, s1.constraints), a.achieved_cost, 1e-9 * a.achieved_cost);
    }
  }
}

TEST(SinglePlacement, PiRotationDegeneracy) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  const auto c = PlacementConstraints::uniform(0.3, 0.6);
  for (int trial = 0; trial < 20; ++trial) {
    const double th = angle(rng);
    const auto sol = place_single_target(single(ArrayMode::kTransceiver, 4, 4, th));
    EXPECT_NEAR(single_target_objective(sol.geometry, th + kPi, c), sol.achieved_cost, 1e-10 * sol.achieved_cost);
    EXPECT_NEAR(single_target_objective(rotate_solution(sol.geometry, kPi), th, c), sol.achieved_cost,
                1e-12 * sol.achieved_cost);
  }
}

TEST(SinglePlacement, DominatesRandomFeasibleGeometries) {
  std::mt19937_64 rng(99);
  for (auto [mode, m, n] : {std::tuple{ArrayMode::kTransceiver, 3, 3}, {ArrayMode::kSeparate, 2, 3}}) {
    const auto s = single(mode, m, n, 0.9);
    const auto sol = place_single_target(s);
    EXPECT_GE(sol.relaxation_bound * (1 + 1e-9), sol.achieved_cost);
    double best = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const auto g = random_feasible_geometry(s.array, s.constraints, rng);
      best = std::max(best, single_target_objective(g, 0.9, s.constraints));
    }
    EXPECT_GE(sol.achieved_cost * (1 + 1e-9), best);
  }
}

TEST(SinglePlacement, ObjectiveDrivesDoaInformation) {
  // Transceivers, one target: J_theta_theta is a fixed multiple of the objective.
  std::mt19937_64 rng(6);
  auto s = single(ArrayMode::kTransceiver, 3, 3, -kPi / 3);
  double ratio = 0.0;
  for (int i = 0; i < 10; ++i) {
    s.array = random_feasible_geometry(s.array, s.constraints, rng);
    const double j = assemble_parameter_fim(s)(0, 0);
    const double obj = single_target_objective(s.array, s.targets[0].doa_rad, s.constraints);
    if (i == 0) ratio = j / obj;
    EXPECT_NEAR(j / obj, ratio, 1e-9 * ratio);
  }
}

TEST(SinglePlacement, Errors) {
  auto s = single(ArrayMode::kTransceiver, 3, 3, 0.0);
  s.targets.push_back(s.targets[0]);
  EXPECT_THROW(place_single_target(s), InvalidScenario);
  EXPECT_THROW(place_single_target(single(ArrayMode::kSeparate, 2, 2, 0.0, 0.6, 0.3)), InfeasibleBounds);
  EXPECT_THROW(build_relaxation({28, 0.0, 0.5, 1, 0}, 2, 3, ArrayMode::kTransceiver, {}), InfeasibleBounds);
}
