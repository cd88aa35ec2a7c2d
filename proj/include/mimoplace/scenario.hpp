#pragma once

// Domain types shared by every module: radar constants, array geometry,
// placement constraints, per-target parameters and the scenario bundle.
//
// Conventions
//   * cells are 1-based; cell c is the annulus ((c-1) r_bin, c r_bin].
//   * DOA theta = atan2(y, x), kept in (-pi, pi].
//   * A transmit/receive pair is indexed (rx n, tx m); its path index is
//     l = m * N + n (0-based), and its difference vector is s_tx - s_rx.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mimoplace/errors.hpp"

namespace mimoplace {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

struct RadarConfig {
  double wavelength_m = 0.3;
  double bin_width_m = 30.0;
  int snapshots = 128;
  double scatter_var = 1e-4;
  double noise_var = 1.0;
  /// Per-transmitter power in watts. Empty means unit power for every transmitter.
  std::vector<double> powers_w;
  double max_range_m = 5000.0;
  /// Keep the spill-only bin 0 in the stacked measurement.
  bool include_bin0 = true;

  double power(std::size_t tx) const { return tx < powers_w.size() ? powers_w[tx] : 1.0; }
};

enum class ArrayMode { kTransceiver, kSeparate };

inline const char* to_string(ArrayMode m) {
  return m == ArrayMode::kTransceiver ? "transceiver" : "separate";
}

struct ArrayGeometry {
  ArrayMode mode = ArrayMode::kTransceiver;
  std::vector<Vec2> tx;
  std::vector<Vec2> rx;
  /// Declares that the joint centroid must vanish.
  bool centered = false;

  std::size_t num_tx() const { return tx.size(); }
  std::size_t num_rx() const { return rx.size(); }
  std::size_t num_paths() const { return tx.size() * rx.size(); }

  static ArrayGeometry transceiver(std::vector<Vec2> antennas) {
    ArrayGeometry g;
    g.mode = ArrayMode::kTransceiver;
    g.tx = antennas;
    g.rx = std::move(antennas);
    return g;
  }
  static ArrayGeometry separate(std::vector<Vec2> tx, std::vector<Vec2> rx) {
    ArrayGeometry g;
    g.mode = ArrayMode::kSeparate;
    g.tx = std::move(tx);
    g.rx = std::move(rx);
    return g;
  }
};

/// Physical antennas: the shared list in transceiver mode, transmitters then
/// receivers in separate mode.
inline std::vector<Vec2> antennas(const ArrayGeometry& g) {
  if (g.mode == ArrayMode::kTransceiver) return g.tx;
  std::vector<Vec2> out = g.tx;
  out.insert(out.end(), g.rx.begin(), g.rx.end());
  return out;
}

inline std::size_t num_antennas(const ArrayGeometry& g) {
  return g.mode == ArrayMode::kTransceiver ? g.tx.size() : g.tx.size() + g.rx.size();
}

/// Rebuilds a geometry of the same shape from a physical antenna list.
inline ArrayGeometry with_antennas(const ArrayGeometry& shape, const std::vector<Vec2>& ant) {
  ArrayGeometry g = shape;
  if (shape.mode == ArrayMode::kTransceiver) {
    g.tx = ant;
    g.rx = ant;
  } else {
    const auto m = shape.tx.size();
    g.tx.assign(ant.begin(), ant.begin() + static_cast<std::ptrdiff_t>(m));
    g.rx.assign(ant.begin() + static_cast<std::ptrdiff_t>(m), ant.end());
  }
  return g;
}

/// Index into antennas() of transmitter m / receiver n.
inline std::size_t tx_antenna(const ArrayGeometry&, std::size_t m) { return m; }
inline std::size_t rx_antenna(const ArrayGeometry& g, std::size_t n) {
  return g.mode == ArrayMode::kTransceiver ? n : g.tx.size() + n;
}

inline Vec2 joint_centroid_sum(const ArrayGeometry& g) {
  Vec2 s = Vec2::Zero();
  for (const auto& p : g.tx) s += p;
  for (const auto& p : g.rx) s += p;
  return s;
}

struct PairBound {
  int rx = 0;  // 0-based receiver index
  int tx = 0;  // 0-based transmitter index
  double d_m = 0.0;
  double e_m = 0.0;
};

struct PlacementConstraints {
  double d_m = 0.3;
  double e_m = 0.6;
  std::vector<PairBound> overrides;
  /// When set, validate_scenario also checks the geometry against the rings.
  bool binding = false;

  std::pair<double, double> bounds(int rx, int tx) const {
    for (const auto& o : overrides)
      if (o.rx == rx && o.tx == tx) return {o.d_m, o.e_m};
    return {d_m, e_m};
  }

  static PlacementConstraints uniform(double d, double e) {
    PlacementConstraints c;
    c.d_m = d;
    c.e_m = e;
    return c;
  }
};

/// One ring-constrained transmit/receive pair, with indices into antennas().
struct ConstrainedPair {
  int rx = 0;
  int tx = 0;
  std::size_t rx_ant = 0;
  std::size_t tx_ant = 0;
  double d = 0.0;
  double e = 0.0;
};

/// Every (rx, tx) pair subject to the distance rings. Self-pairs are dropped
/// in transceiver mode since their separation is identically zero.
inline std::vector<ConstrainedPair> constrained_pairs(const ArrayGeometry& g,
                                                      const PlacementConstraints& c) {
  std::vector<ConstrainedPair> out;
  for (std::size_t m = 0; m < g.num_tx(); ++m) {
    for (std::size_t n = 0; n < g.num_rx(); ++n) {
      if (g.mode == ArrayMode::kTransceiver && n == m) continue;
      auto [d, e] = c.bounds(static_cast<int>(n), static_cast<int>(m));
      out.push_back({static_cast<int>(n), static_cast<int>(m), rx_antenna(g, n), tx_antenna(g, m), d, e});
    }
  }
  return out;
}

/// Largest ring violation in meters (0 when every pair is inside its ring).
inline double max_ring_violation(const ArrayGeometry& g, const std::vector<ConstrainedPair>& pairs) {
  const auto ant = antennas(g);
  double worst = 0.0;
  for (const auto& p : pairs) {
    const double dist = (ant[p.tx_ant] - ant[p.rx_ant]).norm();
    worst = std::max({worst, p.d - dist, dist - p.e});
  }
  return worst;
}

struct TargetParams {
  int cell = 1;
  double doa_rad = 0.0;
  double ratio = 1.0;
  double amp_re = 1.0;
  double amp_im = 0.0;
};

struct Scenario {
  RadarConfig radar;
  ArrayGeometry array;
  PlacementConstraints constraints;
  /// Ordered by cell (stable within a cell); this is the stacking order of
  /// every parameter vector and Fisher matrix.
  std::vector<TargetParams> targets;

  int first_cell() const {
    int c = targets.empty() ? 1 : targets.front().cell;
    for (const auto& t : targets) c = std::min(c, t.cell);
    return c;
  }
  /// Cells are renumbered so the first occupied cell is 1.
  int cell_offset() const { return first_cell() - 1; }
  int relative_cell(const TargetParams& t) const { return t.cell - cell_offset(); }
  int cell_span() const {
    if (targets.empty()) return 0;
    int hi = targets.front().cell;
    for (const auto& t : targets) hi = std::max(hi, t.cell);
    return hi - cell_offset();
  }
  std::vector<int> cell_counts() const {
    std::vector<int> n(static_cast<std::size_t>(cell_span()), 0);
    for (const auto& t : targets) ++n[static_cast<std::size_t>(relative_cell(t) - 1)];
    return n;
  }
};

/// Stable sort of the targets by cell, establishing the stacking order.
inline void sort_targets(Scenario& s) {
  std::stable_sort(s.targets.begin(), s.targets.end(),
                   [](const TargetParams& a, const TargetParams& b) { return a.cell < b.cell; });
}

// ---------------------------------------------------------------------------
// Coordinate conversions

struct CellCoordinates {
  int cell = 1;
  double doa_rad = 0.0;
  double ratio = 1.0;
  double range_m = 0.0;
};

/// Cell index, DOA, in-cell ratio and range of a Cartesian position.
/// A range exactly on a cell edge belongs to the inner cell with ratio 1.
inline CellCoordinates params_from_cartesian(const Vec2& xy, const RadarConfig& radar) {
  const double r = std::hypot(xy.x(), xy.y());
  if (r == 0.0) throw ZeroRangeError();
  if (r > radar.max_range_m) throw OutOfCoverageError(r, radar.max_range_m);
  const double q = r / radar.bin_width_m;
  double c = std::ceil(q);
  // Snap ranges that sit on an edge up to rounding to the inner cell.
  const double nearest = std::round(q);
  if (std::abs(q - nearest) <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, q))
    c = nearest;
  c = std::max(c, 1.0);
  CellCoordinates out;
  out.cell = static_cast<int>(c);
  out.range_m = r;
  out.doa_rad = wrap_angle(std::atan2(xy.y(), xy.x()));
  out.ratio = std::clamp((r + (1.0 - c) * radar.bin_width_m) / radar.bin_width_m, 0.0, 1.0);
  return out;
}

inline double range_of(const TargetParams& p, const RadarConfig& radar) {
  return (p.ratio + static_cast<double>(p.cell) - 1.0) * radar.bin_width_m;
}

inline Vec2 cartesian_from_params(const TargetParams& p, const RadarConfig& radar) {
  const double r = range_of(p, radar);
  return {r * std::cos(p.doa_rad), r * std::sin(p.doa_rad)};
}

inline TargetParams target_at(const Vec2& xy, double amp_re, double amp_im, const RadarConfig& radar) {
  const auto cc = params_from_cartesian(xy, radar);
  return {cc.cell, cc.doa_rad, cc.ratio, amp_re, amp_im};
}

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  kNonPositiveWavelength,
  kNonPositiveBinWidth,
  kNonPositiveSnapshots,
  kNegativeScatterVariance,
  kNonPositiveNoiseVariance,
  kNonPositivePower,
  kPowerCountMismatch,
  kEmptyArray,
  kModeMismatch,
  kNotCentered,
  kInvalidBounds,
  kRingViolated,
  kRatioOutOfRange,
  kAngleOutOfRange,
  kInvalidCell,
  kTargetsNotCellOrdered,
  kNonFinite,
};

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kNonPositiveWavelength: return "NonPositiveWavelength";
    case ViolationKind::kNonPositiveBinWidth: return "NonPositiveBinWidth";
    case ViolationKind::kNonPositiveSnapshots: return "NonPositiveSnapshots";
    case ViolationKind::kNegativeScatterVariance: return "NegativeScatterVariance";
    case ViolationKind::kNonPositiveNoiseVariance: return "NonPositiveNoiseVariance";
    case ViolationKind::kNonPositivePower: return "NonPositivePower";
    case ViolationKind::kPowerCountMismatch: return "PowerCountMismatch";
    case ViolationKind::kEmptyArray: return "EmptyArray";
    case ViolationKind::kModeMismatch: return "ModeMismatch";
    case ViolationKind::kNotCentered: return "NotCentered";
    case ViolationKind::kInvalidBounds: return "InvalidBounds";
    case ViolationKind::kRingViolated: return "RingViolated";
    case ViolationKind::kRatioOutOfRange: return "RatioOutOfRange";
    case ViolationKind::kAngleOutOfRange: return "AngleOutOfRange";
    case ViolationKind::kInvalidCell: return "InvalidCell";
    case ViolationKind::kTargetsNotCellOrdered: return "TargetsNotCellOrdered";
    case ViolationKind::kNonFinite: return "NonFinite";
  }
  return "Unknown";
}

struct Violation {
  ViolationKind kind;
  std::string detail;
};

inline std::vector<Violation> validate_scenario(const Scenario& s) {
  std::vector<Violation> out;
  auto add = [&](ViolationKind k, std::string d) { out.push_back({k, std::move(d)}); };
  const auto& r = s.radar;
  if (!(r.wavelength_m > 0)) add(ViolationKind::kNonPositiveWavelength, "lambda must be > 0");
  if (!(r.bin_width_m > 0)) add(ViolationKind::kNonPositiveBinWidth, "r_bin must be > 0");
  if (r.snapshots < 1) add(ViolationKind::kNonPositiveSnapshots, "K must be >= 1");
  if (!(r.scatter_var >= 0)) add(ViolationKind::kNegativeScatterVariance, "sigma2_alpha must be >= 0");
  if (!(r.noise_var > 0)) add(ViolationKind::kNonPositiveNoiseVariance, "sigma2_w must be > 0");
  for (std::size_t m = 0; m < r.powers_w.size(); ++m)
    if (!(r.powers_w[m] > 0)) add(ViolationKind::kNonPositivePower, "P_" + std::to_string(m + 1));
  if (!r.powers_w.empty() && r.powers_w.size() != s.array.num_tx())
    add(ViolationKind::kPowerCountMismatch, "one power per transmitter");

  const auto& g = s.array;
  if (g.tx.empty() || g.rx.empty()) add(ViolationKind::kEmptyArray, "M and N must be >= 1");
  if (g.mode == ArrayMode::kTransceiver) {
    bool same = g.tx.size() == g.rx.size();
    for (std::size_t i = 0; same && i < g.tx.size(); ++i) same = g.tx[i] == g.rx[i];
    if (!same) add(ViolationKind::kModeMismatch, "transceiver mode needs identical tx and rx lists");
  }
  for (const auto& a : antennas(g))
    if (!a.allFinite()) add(ViolationKind::kNonFinite, "antenna position");
  if (g.centered && joint_centroid_sum(g).norm() > 1e-9 * r.wavelength_m)
    add(ViolationKind::kNotCentered, "joint centroid is not at the origin");

  const auto pairs = constrained_pairs(g, s.constraints);
  for (const auto& p : pairs) {
    if (!(p.d > 0 && p.d < p.e))
      add(ViolationKind::kInvalidBounds,
          "pair (" + std::to_string(p.rx + 1) + "," + std::to_string(p.tx + 1) + ") needs 0 < d < e");
  }
  if (s.constraints.binding) {
    const auto ant = antennas(g);
    for (const auto& p : pairs) {
      const double dist = (ant[p.tx_ant] - ant[p.rx_ant]).norm();
      if (dist < p.d - 1e-9 || dist > p.e + 1e-9)
        add(ViolationKind::kRingViolated,
            "pair (" + std::to_string(p.rx + 1) + "," + std::to_string(p.tx + 1) + ") at " +
                std::to_string(dist) + " m");
    }
  }

  int prev_cell = 0;
  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    const auto& t = s.targets[i];
    const std::string tag = "target " + std::to_string(i + 1);
    if (!(t.ratio >= 0.0 && t.ratio <= 1.0)) add(ViolationKind::kRatioOutOfRange, tag);
    if (!(t.doa_rad > -kPi && t.doa_rad <= kPi)) add(ViolationKind::kAngleOutOfRange, tag);
    if (t.cell < 1) add(ViolationKind::kInvalidCell, tag);
    if (!std::isfinite(t.amp_re) || !std::isfinite(t.amp_im)) add(ViolationKind::kNonFinite, tag);
    if (t.cell < prev_cell) add(ViolationKind::kTargetsNotCellOrdered, tag);
    prev_cell = std::max(prev_cell, t.cell);
  }
  return out;
}

/// Rotation taking an optimum for DOA theta to one for theta + shift.
/// Steering phases use [sin theta, cos theta], so increasing the DOA turns the
/// look direction clockwise and the geometry follows it.
inline Eigen::Matrix2d doa_shift_rotation(double shift) {
  const double c = std::cos(shift), s = std::sin(shift);
  Eigen::Matrix2d g;
  g << c, s, -s, c;
  return g;
}

inline ArrayGeometry transform_geometry(const ArrayGeometry& g, const Eigen::Matrix2d& a) {
  ArrayGeometry out = g;
  for (auto& p : out.tx) p = a * p;
  for (auto& p : out.rx) p = a * p;
  return out;
}

}  // namespace mimoplace
