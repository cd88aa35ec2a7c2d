#include <gtest/gtest.h>

#include <random>

#include "mimoplace/mc_sim.hpp"
#include "test_support.hpp"

using namespace mimoplace;

namespace {

Scenario with_targets(const ArrayGeometry& g, std::vector<TargetParams> t) {
  Scenario s;
  s.array = g;
  s.targets = std::move(t);
  sort_targets(s);
  return s;
}

Scenario amplitudes_set(Scenario s, const std::vector<cplx>& a) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    s.targets[i].amp_re = a[i].real();
    s.targets[i].amp_im = a[i].imag();
  }
  return s;
}

}  // namespace

TEST(Ula, SpacingAndCentroid) {
  const auto g = ula(4, ArrayMode::kTransceiver, 0.15);
  for (std::size_t i = 1; i < g.tx.size(); ++i) EXPECT_NEAR((g.tx[i] - g.tx[i - 1]).norm(), 0.15, 1e-15);
  EXPECT_LT(joint_centroid_sum(g).norm(), 1e-15);
  RadarConfig r;
  const auto h = half_wavelength_ula(ArrayGeometry::separate(std::vector<Vec2>(2), std::vector<Vec2>(3)), r);
  ASSERT_EQ(h.tx.size(), 2u);
  ASSERT_EQ(h.rx.size(), 3u);
  EXPECT_NEAR((h.rx[0] - h.tx[1]).norm(), r.wavelength_m / 2, 1e-15);
  EXPECT_LT(joint_centroid_sum(h).norm(), 1e-15);
}

TEST(SpreadTargets, CoverTheSector) {
  const auto t = spread_targets(5, 28, 3, 3);
  ASSERT_EQ(t.size(), 5u);
  EXPECT_NEAR(t.front().doa_rad, -kPi / 3, 1e-15);
  EXPECT_NEAR(t.back().doa_rad, kPi / 3, 1e-15);
  EXPECT_NEAR(t.back().ratio, 0.66, 1e-15);
}

TEST(ConcentratedFit, EqualsLikelihoodAtFittedAmplitudes) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = mimoplace::testing::random_scenario(rng, 3, 3, 2);
    const auto y = sample_measurement(s, 11, static_cast<std::uint64_t>(trial));
    const auto p = ml_problem(y, s);
    std::vector<double> th, be;
    for (const auto& t : s.targets) {
      th.push_back(t.doa_rad);
      be.push_back(t.ratio);
    }
    const auto fit = concentrated_fit(p, th, be);
    const double at_fit = log_likelihood(y, amplitudes_set(s, fit.amplitudes));
    EXPECT_NEAR(fit.log_likelihood, at_fit, 1e-9 * std::abs(at_fit));
    // Any other amplitude does worse.
    std::normal_distribution<double> n01(0.0, 0.05);
    for (int k = 0; k < 10; ++k) {
      auto a = fit.amplitudes;
      for (auto& v : a) v += cplx(n01(rng), n01(rng));
      EXPECT_LE(log_likelihood(y, amplitudes_set(s, a)), fit.log_likelihood + 1e-9 * std::abs(at_fit));
    }
  }
}

TEST(MlEstimate, NoiselessSingleTargetIsRecovered) {
  const auto s = with_targets(ula(3, ArrayMode::kTransceiver, 0.15), {{28, 0.37, 0.42, 3, -1}});
  const auto y = mean_response(s);
  const auto est = ml_estimate(y, s, EstimatorGrid::front_sector());
  ASSERT_EQ(est.targets.size(), 1u);
  EXPECT_NEAR(est.targets[0].doa_rad, 0.37, 1e-5);
  EXPECT_NEAR(est.targets[0].ratio, 0.42, 1e-5);
  EXPECT_NEAR(std::abs(est.targets[0].amplitude - cplx(3, -1)), 0.0, 1e-5);
  EXPECT_LT((est.targets[0].position - cartesian_from_params(s.targets[0], s.radar)).norm(), 1e-3);
}

TEST(MlEstimate, NoiselessTwoTargetsFromPerturbedStart) {
  const auto truth = with_targets(ula(4, ArrayMode::kTransceiver, 0.15), spread_targets(2, 28, 3, 3));
  auto guess = truth;
  guess.targets[0].doa_rad += 0.004;
  guess.targets[1].ratio -= 0.02;
  const auto est = ml_estimate(mean_response(truth), guess, EstimatorGrid::front_sector());
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(est.targets[i].doa_rad, truth.targets[i].doa_rad, 1e-5);
    EXPECT_NEAR(est.targets[i].ratio, truth.targets[i].ratio, 1e-5);
  }
}

TEST(MlEstimate, WrongLengthThrows) {
  const auto s = with_targets(ula(2, ArrayMode::kTransceiver, 0.15), {{28, 0.1, 0.5, 1, 0}});
  MeasurementVector y;
  y.rho = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(ml_estimate(y, s), DimensionMismatch);
}

TEST(Snr, ScalingRoundTrips) {
  RadarConfig r;
  const auto t = with_snr({28, 0.1, 0.5, 3, 4}, 17.0, r);
  EXPECT_NEAR(target_snr_db(t, r), 17.0, 1e-12);
  EXPECT_NEAR(std::atan2(t.amp_im, t.amp_re), std::atan2(4.0, 3.0), 1e-12);
}

TEST(Rmse, ReproducibleAndShrinksWithSnr) {
  const auto s = with_targets(ula(3, ArrayMode::kTransceiver, 0.15), {{28, 0.3, 0.5, 1, 0}});
  McConfig cfg;
  cfg.snr_db = {5.0, 25.0};
  cfg.trials = 20;
  cfg.seed = 8;
  const auto a = rmse_experiment(s, cfg), b = rmse_experiment(s, cfg);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].rmse_m, b[0].rmse_m);
  EXPECT_EQ(a[1].rmse_m, b[1].rmse_m);
  EXPECT_GT(a[0].rmse_m[0], a[1].rmse_m[0]);
  EXPECT_GT(a[0].crlb_m[0], a[1].crlb_m[0]);
  EXPECT_EQ(a[1].failures, 0);
  EXPECT_EQ(a[1].estimates.size(), 20u);
}

TEST(Rmse, RejectsZeroTrialsAndStopsOnInterrupt) {
  const auto s = with_targets(ula(2, ArrayMode::kTransceiver, 0.15), {{28, 0.3, 0.5, 1, 0}});
  McConfig cfg;
  cfg.trials = 0;
  EXPECT_THROW(rmse_experiment(s, cfg), InvalidScenario);
  cfg.trials = 2;
  cfg.snr_db = {0, 10, 20};
  int polls = 0;
  cfg.interrupted = [&] { return ++polls > 1; };
  EXPECT_EQ(rmse_experiment(s, cfg).size(), 1u);
}

TEST(Rmse, SingularBoundIsInfinite) {
  // Two targets and a single path cannot be separated.
  Scenario s = with_targets(ArrayGeometry::transceiver({{0.0, 0.0}}), spread_targets(2, 28, 3, 3));
  McConfig cfg;
  cfg.trials = 2;
  const auto r = rmse_experiment(s, cfg);
  EXPECT_TRUE(std::isinf(r[0].crlb_m[0]));
}

TEST(Sweep, SpacingAxisGivesLinearArrays) {
  const auto base = with_targets(ArrayGeometry::transceiver(std::vector<Vec2>(2)), {{28, 0.3, 0.5, 3, 3}});
  const auto rows = crlb_sweep(base, SweepAxis::kSpacing, {0.05, 0.1, 0.2});
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_EQ(r.geometry, "ula");
  EXPECT_GT(rows[0].doa_var, rows[2].doa_var);
}

TEST(Sweep, OptimalNeverWorseThanUla) {
  const auto base = with_targets(ArrayGeometry::transceiver(std::vector<Vec2>(3)), {{28, 0.3, 0.5, 3, 3}});
  SweepOptions opt;
  opt.geometries = {"ula", "optimal", "random"};
  const auto rows = crlb_sweep(base, SweepAxis::kAntennaCount, {2, 3}, opt);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); i += 3) {
    EXPECT_EQ(rows[i].geometry, "ula");
    EXPECT_EQ(rows[i + 1].geometry, "optimal");
    EXPECT_LE(rows[i + 1].doa_var, rows[i].doa_var);
  }
}

TEST(Sweep, FileGeometryNeedsMatchingShape) {
  const auto base = with_targets(ArrayGeometry::transceiver(std::vector<Vec2>(3)), {{28, 0.3, 0.5, 3, 3}});
  SweepOptions opt;
  opt.geometries = {"file"};
  EXPECT_THROW(crlb_sweep(base, SweepAxis::kDeltaTheta, {0.2}, opt), InvalidScenario);
  opt.user_geometry = ula(3, ArrayMode::kTransceiver, 0.15);
  EXPECT_EQ(crlb_sweep(base, SweepAxis::kDeltaTheta, {0.2, 0.4}, opt).size(), 2u);
  EXPECT_EQ(crlb_sweep(base, SweepAxis::kAntennaCount, {4}, opt).size(), 0u);
  opt.geometries = {"bogus"};
  EXPECT_THROW(crlb_sweep(base, SweepAxis::kDeltaTheta, {0.2}, opt), InvalidScenario);
}
