#pragma once

// Matched-filter output model of a collocated MIMO radar.
//
// The stacked real measurement rho runs over range bins (bin-major); each bin
// holds the MN real parts followed by the MN imaginary parts of eta_c. A
// target in cell c leaks a fraction beta of its return into bin c and
// (1 - beta) into bin c - 1. Covariance is block tridiagonal with every block
// a scalar multiple of I_2MN, so the whole model is carried by the
// (bins x bins) scalar factor.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "mimoplace/errors.hpp"
#include "mimoplace/scenario.hpp"

namespace mimoplace {

using Omega = Eigen::Matrix<double, 2, Eigen::Dynamic>;

struct ModelLayout {
  int paths = 0;  // MN
  int cells = 0;  // C
  bool include_bin0 = true;
  /// Relative cell (1..C) of every target, in stacking order.
  std::vector<int> target_cells;

  int first_bin() const { return include_bin0 ? 0 : 1; }
  int num_bins() const { return cells + 1 - first_bin(); }
  bool has_bin(int bin) const { return bin >= first_bin() && bin <= cells; }
  int slot(int bin) const { return bin - first_bin(); }
  Eigen::Index block_dim() const { return 2 * static_cast<Eigen::Index>(paths); }
  Eigen::Index dim() const { return block_dim() * num_bins(); }
  Eigen::Index offset(int bin) const { return block_dim() * slot(bin); }
};

inline ModelLayout layout_of(const Scenario& s) {
  ModelLayout l;
  l.paths = static_cast<int>(s.array.num_paths());
  l.cells = std::max(1, s.cell_span());
  l.include_bin0 = s.radar.include_bin0;
  for (const auto& t : s.targets) l.target_cells.push_back(s.relative_cell(t));
  return l;
}

/// Columns sqrt(P_m) (s_rn - s_tm), path l = m N + n.
inline Omega omega_matrix(const ArrayGeometry& g, const RadarConfig& radar) {
  const auto m_count = g.num_tx(), n_count = g.num_rx();
  Omega om(2, static_cast<Eigen::Index>(m_count * n_count));
  for (std::size_t m = 0; m < m_count; ++m) {
    const double amp = std::sqrt(radar.power(m));
    for (std::size_t n = 0; n < n_count; ++n)
      om.col(static_cast<Eigen::Index>(m * n_count + n)) = amp * (g.rx[n] - g.tx[m]);
  }
  return om;
}

inline double wavenumber(const RadarConfig& r) { return 2.0 * kPi / r.wavelength_m; }

/// Unit look vector [sin theta, cos theta] of the steering phases.
inline Vec2 look_vector(double doa) { return {std::sin(doa), std::cos(doa)}; }
/// Its derivative p = [cos theta, -sin theta].
inline Vec2 look_derivative(double doa) { return {std::cos(doa), -std::sin(doa)}; }

struct Steering {
  Eigen::ArrayXd phase;       // omega(l)
  Eigen::ArrayXd phase_rate;  // d omega(l) / d theta
  Vec2 direction_derivative;  // p
  Eigen::Vector2d ratio_pair; // [1 - beta, beta]
  Eigen::ArrayXd re;          // Re psi(l)
  Eigen::ArrayXd im;          // Im psi(l)
};

inline Steering steering(const TargetParams& t, const Omega& om, const RadarConfig& radar) {
  const double k = wavenumber(radar);
  const double root_k = std::sqrt(static_cast<double>(radar.snapshots));
  Steering s;
  s.direction_derivative = look_derivative(t.doa_rad);
  s.phase = k * (look_vector(t.doa_rad).transpose() * om).transpose().array();
  s.phase_rate = k * (s.direction_derivative.transpose() * om).transpose().array();
  s.ratio_pair = {1.0 - t.ratio, t.ratio};
  s.re = root_k * s.phase.cos();
  s.im = root_k * s.phase.sin();
  return s;
}

/// Weight of a target's return in each bin: beta in its own cell, 1 - beta in the one below.
struct BinWeights {
  int upper_bin;
  double upper;  // beta
  double lower;  // 1 - beta, lands in upper_bin - 1
};

inline BinWeights bin_weights(int rel_cell, double ratio) { return {rel_cell, ratio, 1.0 - ratio}; }

struct MeasurementVector {
  ModelLayout layout;
  Eigen::VectorXd rho;

  std::complex<double> at(int bin, int path) const {
    const auto o = layout.offset(bin);
    return {rho[o + path], rho[o + layout.paths + path]};
  }
};

/// Adds the mean contribution of one target to rho.
inline void accumulate_mean(Eigen::Ref<Eigen::VectorXd> rho, const ModelLayout& layout, int rel_cell,
                            const TargetParams& t, const Steering& st) {
  const Eigen::ArrayXd re = t.amp_re * st.re - t.amp_im * st.im;
  const Eigen::ArrayXd im = t.amp_re * st.im + t.amp_im * st.re;
  const auto w = bin_weights(rel_cell, t.ratio);
  const auto p = static_cast<Eigen::Index>(layout.paths);
  for (auto [bin, weight] : {std::pair{w.upper_bin, w.upper}, std::pair{w.upper_bin - 1, w.lower}}) {
    if (!layout.has_bin(bin)) continue;
    const auto o = layout.offset(bin);
    rho.segment(o, p) += weight * re.matrix();
    rho.segment(o + p, p) += weight * im.matrix();
  }
}

inline Eigen::VectorXd mean_vector(const ModelLayout& layout, const std::vector<TargetParams>& targets,
                                   const Omega& om, const RadarConfig& radar) {
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(layout.dim());
  for (std::size_t i = 0; i < targets.size(); ++i)
    accumulate_mean(rho, layout, layout.target_cells[i], targets[i], steering(targets[i], om, radar));
  return rho;
}

inline MeasurementVector mean_response(const Scenario& s) {
  MeasurementVector out;
  out.layout = layout_of(s);
  out.rho = mean_vector(out.layout, s.targets, omega_matrix(s.array, s.radar), s.radar);
  return out;
}

/// (bins x bins) scalar factor S with Sigma = S (x) I_2MN.
inline Eigen::MatrixXd covariance_factor(const ModelLayout& layout, const std::vector<double>& ratios,
                                         const RadarConfig& radar) {
  const int b = layout.num_bins();
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(b, b) * radar.noise_var;
  const double ks = static_cast<double>(radar.snapshots) * radar.scatter_var;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const int c = layout.target_cells[i];
    const double beta = ratios[i];
    const bool hi = layout.has_bin(c), lo = layout.has_bin(c - 1);
    if (hi) s(layout.slot(c), layout.slot(c)) += ks * beta * beta;
    if (lo) s(layout.slot(c - 1), layout.slot(c - 1)) += ks * (1 - beta) * (1 - beta);
    if (hi && lo) {
      s(layout.slot(c), layout.slot(c - 1)) += ks * beta * (1 - beta);
      s(layout.slot(c - 1), layout.slot(c)) += ks * beta * (1 - beta);
    }
  }
  return s;
}

/// d S / d beta of target i.
inline Eigen::MatrixXd covariance_factor_derivative(const ModelLayout& layout, std::size_t i, double beta,
                                                    const RadarConfig& radar) {
  const int b = layout.num_bins();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(b, b);
  const double ks = static_cast<double>(radar.snapshots) * radar.scatter_var;
  const int c = layout.target_cells[i];
  const bool hi = layout.has_bin(c), lo = layout.has_bin(c - 1);
  if (hi) d(layout.slot(c), layout.slot(c)) = 2.0 * ks * beta;
  if (lo) d(layout.slot(c - 1), layout.slot(c - 1)) = -2.0 * ks * (1 - beta);
  if (hi && lo) {
    d(layout.slot(c), layout.slot(c - 1)) = ks * (1 - 2 * beta);
    d(layout.slot(c - 1), layout.slot(c)) = ks * (1 - 2 * beta);
  }
  return d;
}

inline std::vector<double> ratios_of(const std::vector<TargetParams>& targets) {
  std::vector<double> r;
  r.reserve(targets.size());
  for (const auto& t : targets) r.push_back(t.ratio);
  return r;
}

struct CovarianceModel {
  ModelLayout layout;
  Eigen::MatrixXd factor;

  /// Full 2MN(bins) covariance; only for oracles and small problems.
  Eigen::MatrixXd dense() const {
    const auto n = layout.block_dim();
    const auto b = factor.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * b, n * b);
    for (Eigen::Index i = 0; i < b; ++i)
      for (Eigen::Index j = 0; j < b; ++j)
        if (factor(i, j) != 0.0) out.block(i * n, j * n, n, n).diagonal().setConstant(factor(i, j));
    return out;
  }
};

inline CovarianceModel covariance(const Scenario& s) {
  CovarianceModel c;
  c.layout = layout_of(s);
  c.factor = covariance_factor(c.layout, ratios_of(s.targets), s.radar);
  return c;
}

/// Scalar factor of the covariance restricted to the three bins ending at
/// `upper_cell`, with the explicit entries of its inverse:
///   inverse = [[k1, k4, k5], [k4, k2, k6], [k5, k6, k3]].
/// Bins outside the model are replaced by decoupled unit rows.
struct RestrictedCovariance {
  std::array<int, 3> bins{};
  Eigen::Matrix3d factor = Eigen::Matrix3d::Identity();
  std::array<double, 6> k{};

  Eigen::Matrix3d inverse() const {
    Eigen::Matrix3d m;
    m << k[0], k[3], k[4], k[3], k[1], k[5], k[4], k[5], k[2];
    return m;
  }
};

inline RestrictedCovariance restricted_covariance(const Scenario& s, int lower_cell, int upper_cell) {
  if (!(lower_cell == upper_cell || lower_cell == upper_cell - 1))
    throw CellGapError(lower_cell, upper_cell);
  const auto layout = layout_of(s);
  const auto full = covariance_factor(layout, ratios_of(s.targets), s.radar);
  RestrictedCovariance out;
  out.bins = {upper_cell - 2, upper_cell - 1, upper_cell};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const int bi = out.bins[static_cast<std::size_t>(i)], bj = out.bins[static_cast<std::size_t>(j)];
      if (layout.has_bin(bi) && layout.has_bin(bj))
        out.factor(i, j) = full(layout.slot(bi), layout.slot(bj));
    }
  const auto& f = out.factor;
  const double a1 = f(0, 0), a2 = f(1, 1), a3 = f(2, 2), a4 = f(0, 1), a5 = f(1, 2);
  const double det = a1 * (a2 * a3 - a5 * a5) - a4 * a4 * a3;
  const double scale = std::abs(a1 * a2 * a3);
  if (!(std::abs(det) > 1e-14 * scale)) throw SingularRestriction("restricted covariance is singular");
  out.k = {(a2 * a3 - a5 * a5) / det, a1 * a3 / det, (a1 * a2 - a4 * a4) / det,
           -a4 * a3 / det, a4 * a5 / det, -a1 * a5 / det};
  return out;
}

/// Draw from N(rho_bar, Sigma) using the symmetric square root of the scalar factor.
inline MeasurementVector sample_measurement(const Scenario& s, std::uint64_t seed, std::uint64_t stream = 0) {
  auto mean = mean_response(s);
  const auto factor = covariance_factor(mean.layout, ratios_of(s.targets), s.radar);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(factor);
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
      eig.eigenvectors().transpose();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = mean.layout.block_dim();
  const auto b = static_cast<Eigen::Index>(mean.layout.num_bins());
  Eigen::MatrixXd w(n, b);
  for (Eigen::Index j = 0; j < b; ++j)
    for (Eigen::Index i = 0; i < n; ++i) w(i, j) = normal(rng);
  const Eigen::MatrixXd x = w * root;
  mean.rho += Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  return mean;
}

/// Exact Gaussian log-density, normalising constant included.
inline double log_likelihood(const MeasurementVector& y, const Scenario& s) {
  const auto layout = layout_of(s);
  if (y.rho.size() != layout.dim())
    throw DimensionMismatch("measurement has " + std::to_string(y.rho.size()) + " entries, model expects " +
                            std::to_string(layout.dim()));
  const Eigen::VectorXd mean = mean_vector(layout, s.targets, omega_matrix(s.array, s.radar), s.radar);
  const auto factor = covariance_factor(layout, ratios_of(s.targets), s.radar);
  Eigen::LLT<Eigen::MatrixXd> llt(factor);
  const Eigen::VectorXd r = y.rho - mean;
  const Eigen::Map<const Eigen::MatrixXd> rm(r.data(), layout.block_dim(), layout.num_bins());
  const Eigen::MatrixXd g = rm.transpose() * rm;
  const double quad = (llt.solve(g)).trace();
  const double logdet_factor = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double n = static_cast<double>(layout.dim());
  return -0.5 * (n * std::log(2.0 * kPi) + static_cast<double>(layout.block_dim()) * logdet_factor + quad);
}

}  // namespace mimoplace
