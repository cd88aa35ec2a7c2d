#include <gtest/gtest.h>

#include <random>

#include "mimoplace/scenario.hpp"
#include "mimoplace/scenario_io.hpp"

using namespace mimoplace;

namespace {

bool has_kind(const std::vector<Violation>& v, ViolationKind k) {
  for (const auto& x : v)
    if (x.kind == k) return true;
  return false;
}

Scenario table1_single() {
  Scenario s;
  s.array = ArrayGeometry::transceiver({{-0.225, 0.0}, {0.225, 0.0}});
  s.targets = {target_at({410.0, -710.0}, 3.0, 3.0, s.radar)};
  return s;
}

}  // namespace

TEST(Coordinates, RoundTripOnRandomTuples) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> cell(1, 150);
  std::uniform_real_distribution<double> angle(-kPi, kPi), ratio(1e-6, 1.0);
  RadarConfig r;
  for (int i = 0; i < 10000; ++i) {
    TargetParams p{cell(rng), angle(rng), ratio(rng), 1.0, 0.0};
    if (p.doa_rad == -kPi) p.doa_rad = kPi;
    const auto back = params_from_cartesian(cartesian_from_params(p, r), r);
    ASSERT_EQ(back.cell, p.cell);
    EXPECT_NEAR(back.ratio, p.ratio, 1e-12 * std::max(1.0, static_cast<double>(p.cell)));
    EXPECT_NEAR(wrap_angle(back.doa_rad - p.doa_rad), 0.0, 1e-12);
  }
}

TEST(Coordinates, ReferenceTargetSitsInCell28) {
  RadarConfig r;
  const auto c = params_from_cartesian({410.0, -710.0}, r);
  EXPECT_EQ(c.cell, 28);
  EXPECT_NEAR(c.doa_rad, std::atan2(-710.0, 410.0), 1e-15);
  EXPECT_NEAR(c.doa_rad, -kPi / 3, 2e-4);
  EXPECT_NEAR(c.ratio, std::hypot(410.0, 710.0) / 30.0 - 27.0, 1e-12);
}

TEST(Coordinates, FullQuadrantAngles) {
  RadarConfig r;
  EXPECT_NEAR(params_from_cartesian({-100.0, 1.0}, r).doa_rad, std::atan2(1.0, -100.0), 1e-15);
  EXPECT_NEAR(params_from_cartesian({-100.0, -1.0}, r).doa_rad, std::atan2(-1.0, -100.0), 1e-15);
  EXPECT_DOUBLE_EQ(params_from_cartesian({-100.0, 0.0}, r).doa_rad, kPi);
}

TEST(Coordinates, CellEdgeBelongsToInnerCell) {
  RadarConfig r;
  const auto edge = params_from_cartesian({60.0, 0.0}, r);
  EXPECT_EQ(edge.cell, 2);
  EXPECT_DOUBLE_EQ(edge.ratio, 1.0);
  const auto past = params_from_cartesian({60.0 + 1e-9, 0.0}, r);
  EXPECT_EQ(past.cell, 3);
  EXPECT_NEAR(past.ratio, 0.0, 1e-9);
}

TEST(Coordinates, RatioIncreasesAcrossCell) {
  RadarConfig r;
  double prev = -1.0;
  for (int i = 1; i <= 200; ++i) {
    const double range = 810.0 + 30.0 * i / 201.0;
    const auto c = params_from_cartesian({0.0, range}, r);
    ASSERT_EQ(c.cell, 28);
    EXPECT_GT(c.ratio, prev);
    prev = c.ratio;
  }
}

TEST(Coordinates, EveryRangeMapsToOneCell) {
  RadarConfig r;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-3, 4999.0);
  for (int i = 0; i < 5000; ++i) {
    const double range = u(rng);
    const auto c = params_from_cartesian({range, 0.0}, r);
    EXPECT_GT(range, (c.cell - 1) * r.bin_width_m - 1e-9);
    EXPECT_LE(range, c.cell * r.bin_width_m + 1e-9);
  }
}

TEST(Coordinates, OriginAndCoverage) {
  RadarConfig r;
  EXPECT_THROW(params_from_cartesian({0.0, 0.0}, r), ZeroRangeError);
  EXPECT_THROW(params_from_cartesian({6000.0, 0.0}, r), OutOfCoverageError);
}

TEST(Validation, WellFormedScenarioIsClean) { EXPECT_TRUE(validate_scenario(table1_single()).empty()); }

TEST(Validation, RatioOutOfRange) {
  auto s = table1_single();
  s.targets[0].ratio = 1.5;
  const auto v = validate_scenario(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::kRatioOutOfRange);
}

TEST(Validation, TransceiverListsMustMatch) {
  auto s = table1_single();
  s.array.rx[0].x() += 0.1;
  EXPECT_TRUE(has_kind(validate_scenario(s), ViolationKind::kModeMismatch));
}

TEST(Validation, BindingRingsAreChecked) {
  auto s = table1_single();
  s.array = ArrayGeometry::transceiver({{-0.05, 0.0}, {0.05, 0.0}});
  EXPECT_TRUE(validate_scenario(s).empty());
  s.constraints.binding = true;
  EXPECT_TRUE(has_kind(validate_scenario(s), ViolationKind::kRingViolated));
}

TEST(Validation, RadarAndTargetFields) {
  auto s = table1_single();
  s.radar.noise_var = 0.0;
  s.radar.snapshots = 0;
  s.radar.powers_w = {1.0};
  s.targets.push_back({3, 0.1, 0.5, 1.0, 0.0});
  s.targets.push_back({1, 4.0, 0.5, 1.0, 0.0});
  const auto v = validate_scenario(s);
  EXPECT_TRUE(has_kind(v, ViolationKind::kNonPositiveNoiseVariance));
  EXPECT_TRUE(has_kind(v, ViolationKind::kNonPositiveSnapshots));
  EXPECT_TRUE(has_kind(v, ViolationKind::kPowerCountMismatch));
  EXPECT_TRUE(has_kind(v, ViolationKind::kTargetsNotCellOrdered));
  EXPECT_TRUE(has_kind(v, ViolationKind::kAngleOutOfRange));
}

TEST(Validation, CentroidDeclaration) {
  auto s = table1_single();
  s.array = ArrayGeometry::transceiver({{0.0, 0.0}, {0.4, 0.0}});
  s.array.centered = true;
  EXPECT_TRUE(has_kind(validate_scenario(s), ViolationKind::kNotCentered));
}

TEST(Pairs, TransceiverDropsSelfPairs) {
  const auto g = ArrayGeometry::transceiver(std::vector<Vec2>(4));
  EXPECT_EQ(constrained_pairs(g, {}).size(), 12u);
  const auto sep = ArrayGeometry::separate(std::vector<Vec2>(3), std::vector<Vec2>(2));
  const auto pairs = constrained_pairs(sep, {});
  ASSERT_EQ(pairs.size(), 6u);
  for (const auto& p : pairs) EXPECT_EQ(p.rx_ant, 3u + static_cast<std::size_t>(p.rx));
}

TEST(Pairs, OverridesApplyToOnePair) {
  PlacementConstraints c;
  c.overrides.push_back({1, 0, 0.4, 0.5});
  const auto pairs = constrained_pairs(ArrayGeometry::separate(std::vector<Vec2>(2), std::vector<Vec2>(2)), c);
  int hits = 0;
  for (const auto& p : pairs) {
    if (p.rx == 1 && p.tx == 0) {
      ++hits;
      EXPECT_EQ(p.d, 0.4);
      EXPECT_EQ(p.e, 0.5);
    } else {
      EXPECT_EQ(p.d, 0.3);
      EXPECT_EQ(p.e, 0.6);
    }
  }
  EXPECT_EQ(hits, 1);
}

TEST(Pairs, RotationIsOrthogonalAndMovesLookDerivative) {
  for (double shift : {0.3, -1.2, kPi}) {
    const auto g = doa_shift_rotation(shift);
    EXPECT_LT((g.transpose() * g - Eigen::Matrix2d::Identity()).norm(), 1e-14);
    for (double th : {-1.0, 0.2, 2.5}) {
      const Vec2 p0(std::cos(th), -std::sin(th)), p1(std::cos(th + shift), -std::sin(th + shift));
      EXPECT_LT((g * p0 - p1).norm(), 1e-14);
    }
  }
}

// ---------------------------------------------------------------------------
// Scenario documents

TEST(ScenarioIo, MinimalDocumentAppliesDefaults) {
  const auto s = load_scenario(R"({
    "array": {"mode": "transceiver", "tx": [[-0.2, 0], [0.2, 0]]},
    "targets": [{"x_m": 410, "y_m": -710, "xi": 3, "zeta": 3}]
  })");
  EXPECT_EQ(s.array.num_tx(), 2u);
  EXPECT_EQ(s.array.num_rx(), 2u);
  EXPECT_EQ(s.radar.wavelength_m, 0.3);
  EXPECT_EQ(s.radar.bin_width_m, 30.0);
  EXPECT_EQ(s.radar.snapshots, 128);
  EXPECT_EQ(s.radar.scatter_var, 1e-4);
  EXPECT_EQ(s.radar.noise_var, 1.0);
  EXPECT_EQ(s.radar.power(0), 1.0);
  EXPECT_DOUBLE_EQ(s.constraints.d_m, 0.3);
  EXPECT_DOUBLE_EQ(s.constraints.e_m, 0.6);
  ASSERT_EQ(s.targets.size(), 1u);
  EXPECT_EQ(s.targets[0].cell, 28);
}

TEST(ScenarioIo, ConstraintDefaultsFollowWavelength) {
  const auto s = load_scenario(R"({"radar": {"lambda_m": 0.1},
    "array": {"mode": "transceiver", "tx": [[0, 0]]}, "targets": []})");
  EXPECT_DOUBLE_EQ(s.constraints.d_m, 0.1);
  EXPECT_DOUBLE_EQ(s.constraints.e_m, 0.2);
}

TEST(ScenarioIo, MalformedNumberNamesField) {
  try {
    load_scenario(R"({"radar": {"lambda_m": "abc"}, "array": {"mode": "transceiver", "tx": [[0, 0]]}, "targets": []})");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field, "radar.lambda_m");
    EXPECT_NE(std::string(e.what()).find("radar.lambda_m"), std::string::npos);
  }
}

TEST(ScenarioIo, SyntaxErrorCarriesLine) {
  try {
    load_scenario("{\n  \"array\": {\n    \"mode\": \"transceiver\",,\n  }\n}");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3);
  }
}

TEST(ScenarioIo, UnknownKeysRejected) {
  EXPECT_THROW(load_scenario(R"({"array": {"mode": "transceiver", "tx": [[0, 0]]}, "targets": [], "extra": 1})"),
               SchemaError);
  EXPECT_THROW(load_scenario(R"({"radar": {"lamda_m": 0.3}, "array": {"mode": "transceiver", "tx": [[0, 0]]},
                                 "targets": []})"),
               SchemaError);
  EXPECT_THROW(load_scenario(R"({"array": {"mode": "transceiver", "tx": [[0, 0]]},
                                 "targets": [{"x_m": 400, "y_m": 1, "xi": 1, "zeta": 0, "beta": 0.2}]})"),
               SchemaError);
}

TEST(ScenarioIo, MissingRequiredFields) {
  EXPECT_THROW(load_scenario(R"({"targets": []})"), SchemaError);
  EXPECT_THROW(load_scenario(R"({"array": {"mode": "transceiver", "tx": [[0, 0]]}})"), SchemaError);
  EXPECT_THROW(load_scenario(R"({"array": {"mode": "separate", "tx": [[0, 0]]}, "targets": []})"), SchemaError);
  EXPECT_THROW(load_scenario(R"({"array": {"mode": "transceiver", "tx": [[0, 0]]},
                                 "targets": [{"x_m": 400, "y_m": 1, "xi": 1}]})"),
               SchemaError);
}

TEST(ScenarioIo, BadShapesAndModes) {
  EXPECT_THROW(load_scenario(R"({"array": {"mode": "bistatic", "tx": [[0, 0]]}, "targets": []})"), ParseError);
  EXPECT_THROW(load_scenario(R"({"array": {"mode": "transceiver", "tx": [[0, 0, 1]]}, "targets": []})"), ParseError);
  EXPECT_THROW(load_scenario(R"({"radar": {"snapshots": 1.5}, "array": {"mode": "transceiver", "tx": [[0, 0]]},
                                 "targets": []})"),
               ParseError);
}

TEST(ScenarioIo, PairOverridesAreOneBased) {
  const auto s = load_scenario(R"({"array": {"mode": "separate", "tx": [[0, 0], [1, 0]], "rx": [[0, 1]]},
    "constraints": {"d_m": 0.3, "e_m": 0.6, "pairs": [{"n": 1, "m": 2, "d_m": 0.35, "e_m": 0.5}]},
    "targets": []})");
  ASSERT_EQ(s.constraints.overrides.size(), 1u);
  EXPECT_EQ(s.constraints.overrides[0].rx, 0);
  EXPECT_EQ(s.constraints.overrides[0].tx, 1);
}

TEST(ScenarioIo, TargetsSortedByCell) {
  const auto s = load_scenario(R"({"array": {"mode": "transceiver", "tx": [[0, 0]]},
    "targets": [{"cell": 5, "theta_rad": 0.1, "beta": 0.5, "xi": 1, "zeta": 0},
                {"cell": 4, "theta_rad": 0.2, "beta": 0.5, "xi": 1, "zeta": 0}]})");
  EXPECT_EQ(s.targets[0].cell, 4);
  EXPECT_EQ(s.targets[1].cell, 5);
}

TEST(ScenarioIo, SaveLoadRoundTripIsExact) {
  Scenario s;
  s.radar.powers_w = {1.5, 0.5};
  s.radar.include_bin0 = false;
  s.array = ArrayGeometry::separate({{0.1234567890123, -0.3}, {0.2, 0.1}}, {{-1.0 / 3.0, 0.25}});
  s.array.centered = true;
  s.constraints.overrides.push_back({0, 1, 0.31, 0.59});
  s.targets = {{28, -kPi / 3, 0.33, 3.0, -1.0 / 7.0}, {29, 0.1, 0.9, 0.5, 0.25}};
  const auto back = load_scenario(save_scenario(s));
  EXPECT_EQ(back.radar.powers_w, s.radar.powers_w);
  EXPECT_EQ(back.radar.include_bin0, false);
  EXPECT_EQ(back.array.tx, s.array.tx);
  EXPECT_EQ(back.array.rx, s.array.rx);
  EXPECT_TRUE(back.array.centered);
  ASSERT_EQ(back.constraints.overrides.size(), 1u);
  EXPECT_EQ(back.constraints.overrides[0].tx, 1);
  ASSERT_EQ(back.targets.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.targets[i].cell, s.targets[i].cell);
    EXPECT_EQ(back.targets[i].doa_rad, s.targets[i].doa_rad);
    EXPECT_EQ(back.targets[i].ratio, s.targets[i].ratio);
    EXPECT_EQ(back.targets[i].amp_im, s.targets[i].amp_im);
  }
}

TEST(ScenarioIo, MissingFileIsParseError) { EXPECT_THROW(load_scenario_file("/nonexistent/x.json"), ParseError); }
