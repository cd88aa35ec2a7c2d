#pragma once

// Fisher information of the stacked matched-filter output, its mapping to
// Cartesian state and the resulting Cramer-Rao bound.
//
// Parameters are stacked cell-major, then by target within a cell, then
// (theta, beta, xi, zeta). State vectors use (x, y, xi, zeta) in the same order.

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "mimoplace/errors.hpp"
#include "mimoplace/scenario.hpp"
#include "mimoplace/signal_model.hpp"

namespace mimoplace {

struct FimOptions {
  /// Zero the blocks of targets more than one cell apart.
  bool banded = true;
  /// Add eps I (eps = 1e-10 trace / dim) to the state FIM before inverting.
  bool ridge = false;
  double max_condition = 1e12;
};

/// Everything the closed-form entries need, computed once per scenario.
struct FimContext {
  ModelLayout layout;
  Omega omega;
  Eigen::MatrixXd factor;      // S
  Eigen::MatrixXd factor_inv;  // S^-1
  std::vector<Steering> steer;
  std::vector<Eigen::VectorXd> weights;      // u_t: bin weights
  std::vector<Eigen::VectorXd> weight_rate;  // d u_t / d beta
  std::vector<Eigen::MatrixXd> factor_rate;  // d S / d beta_t
  double snapshots = 1.0;
};

inline FimContext fim_context(const Scenario& s) {
  FimContext ctx;
  ctx.layout = layout_of(s);
  ctx.omega = omega_matrix(s.array, s.radar);
  ctx.factor = covariance_factor(ctx.layout, ratios_of(s.targets), s.radar);
  ctx.factor_inv = ctx.factor.llt().solve(Eigen::MatrixXd::Identity(ctx.factor.rows(), ctx.factor.cols()));
  ctx.snapshots = static_cast<double>(s.radar.snapshots);
  const int bins = ctx.layout.num_bins();
  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    const auto& t = s.targets[i];
    const int c = ctx.layout.target_cells[i];
    ctx.steer.push_back(steering(t, ctx.omega, s.radar));
    Eigen::VectorXd u = Eigen::VectorXd::Zero(bins), du = Eigen::VectorXd::Zero(bins);
    if (ctx.layout.has_bin(c)) {
      u[ctx.layout.slot(c)] = t.ratio;
      du[ctx.layout.slot(c)] = 1.0;
    }
    if (ctx.layout.has_bin(c - 1)) {
      u[ctx.layout.slot(c - 1)] = 1.0 - t.ratio;
      du[ctx.layout.slot(c - 1)] = -1.0;
    }
    ctx.weights.push_back(u);
    ctx.weight_rate.push_back(du);
    ctx.factor_rate.push_back(covariance_factor_derivative(ctx.layout, i, t.ratio, s.radar));
  }
  return ctx;
}

/// Amplitude products and inverse-covariance weights of one target pair.
/// The weights contract bin-weight vectors through S^-1:
///   uu = u_a' S^-1 u_b, ud = u_a' S^-1 u'_b, du = u'_a' S^-1 u_b, dd = u'_a' S^-1 u'_b.
struct PairCoefficients {
  double kappa = 0.0;
  double iota = 0.0;
  double uu = 0.0;
  double ud = 0.0;
  double du = 0.0;
  double dd = 0.0;
};

inline PairCoefficients pair_coefficients(const FimContext& ctx, const Scenario& s, std::size_t a,
                                          std::size_t b) {
  const auto& ta = s.targets[a];
  const auto& tb = s.targets[b];
  PairCoefficients pc;
  pc.kappa = ta.amp_re * tb.amp_re + ta.amp_im * tb.amp_im;
  pc.iota = ta.amp_re * tb.amp_im - ta.amp_im * tb.amp_re;
  const auto& w = ctx.factor_inv;
  pc.uu = ctx.weights[a].dot(w * ctx.weights[b]);
  pc.ud = ctx.weights[a].dot(w * ctx.weight_rate[b]);
  pc.du = ctx.weight_rate[a].dot(w * ctx.weights[b]);
  pc.dd = ctx.weight_rate[a].dot(w * ctx.weight_rate[b]);
  return pc;
}

/// Covariance part of the beta-beta entry: (1/2) tr(Sigma^-1 dSigma_a Sigma^-1 dSigma_b).
inline double covariance_information(const FimContext& ctx, std::size_t a, std::size_t b) {
  const Eigen::MatrixXd left = ctx.factor_inv * ctx.factor_rate[a];
  const Eigen::MatrixXd right = ctx.factor_inv * ctx.factor_rate[b];
  return static_cast<double>(ctx.layout.paths) * (left.cwiseProduct(right.transpose())).sum();
}

namespace detail {

inline Eigen::Matrix4d pair_block(const FimContext& ctx, const Scenario& s, std::size_t a, std::size_t b) {
  const auto pc = pair_coefficients(ctx, s, a, b);
  const auto& sa = ctx.steer[a];
  const auto& sb = ctx.steer[b];
  const auto& ta = s.targets[a];
  const auto& tb = s.targets[b];
  const Eigen::ArrayXd delta = sb.phase - sa.phase;
  const Eigen::ArrayXd cs = delta.cos(), sn = delta.sin();
  const Eigen::ArrayXd& qa = sa.phase_rate;
  const Eigen::ArrayXd& qb = sb.phase_rate;
  const Eigen::ArrayXd re = pc.kappa * cs - pc.iota * sn;
  const Eigen::ArrayXd im = pc.kappa * sn + pc.iota * cs;
  const double k = ctx.snapshots;

  Eigen::Matrix4d j;
  j(0, 0) = k * pc.uu * (qa * qb * re).sum();
  j(0, 1) = k * pc.ud * (qa * im).sum();
  j(0, 2) = k * pc.uu * (qa * (ta.amp_re * sn - ta.amp_im * cs)).sum();
  j(0, 3) = k * pc.uu * (qa * (ta.amp_re * cs + ta.amp_im * sn)).sum();

  j(1, 0) = -k * pc.du * (qb * im).sum();
  j(1, 1) = k * pc.dd * re.sum() + covariance_information(ctx, a, b);
  j(1, 2) = k * pc.du * (ta.amp_re * cs + ta.amp_im * sn).sum();
  j(1, 3) = k * pc.du * (ta.amp_im * cs - ta.amp_re * sn).sum();

  j(2, 0) = -k * pc.uu * (qb * (tb.amp_re * sn + tb.amp_im * cs)).sum();
  j(2, 1) = k * pc.ud * (tb.amp_re * cs - tb.amp_im * sn).sum();
  j(2, 2) = k * pc.uu * cs.sum();
  j(2, 3) = -k * pc.uu * sn.sum();

  j(3, 0) = k * pc.uu * (qb * (tb.amp_re * cs - tb.amp_im * sn)).sum();
  j(3, 1) = k * pc.ud * (tb.amp_re * sn + tb.amp_im * cs).sum();
  j(3, 2) = k * pc.uu * sn.sum();
  j(3, 3) = k * pc.uu * cs.sum();
  return j;
}

}  // namespace detail

/// 4x4 Fisher block between targets a (rows) and b (columns).
inline Eigen::Matrix4d pair_fim_block(const FimContext& ctx, const Scenario& s, std::size_t a, std::size_t b) {
  const int ca = ctx.layout.target_cells[a], cb = ctx.layout.target_cells[b];
  if (std::abs(ca - cb) > 1) throw CellGapError(s.targets[a].cell, s.targets[b].cell);
  return detail::pair_block(ctx, s, a, b);
}

inline Eigen::Matrix4d pair_fim_block(const Scenario& s, std::size_t a, std::size_t b) {
  return pair_fim_block(fim_context(s), s, a, b);
}

inline Eigen::MatrixXd assemble_parameter_fim(const FimContext& ctx, const Scenario& s,
                                              const FimOptions& opt = {}) {
  const auto t = static_cast<Eigen::Index>(s.targets.size());
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(4 * t, 4 * t);
  for (Eigen::Index a = 0; a < t; ++a) {
    for (Eigen::Index b = a; b < t; ++b) {
      const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      // Unbanded blocks use the same closed form, coupled through the full inverse.
      if (opt.banded && std::abs(ctx.layout.target_cells[ua] - ctx.layout.target_cells[ub]) > 1) continue;
      const Eigen::Matrix4d blk = detail::pair_block(ctx, s, ua, ub);
      j.block<4, 4>(4 * a, 4 * b) = blk;
      if (a != b) j.block<4, 4>(4 * b, 4 * a) = blk.transpose();
    }
  }
  // Diagonal blocks are symmetric analytically; remove rounding asymmetry.
  return 0.5 * (j + j.transpose());
}

inline Eigen::MatrixXd assemble_parameter_fim(const Scenario& s, const FimOptions& opt = {}) {
  return assemble_parameter_fim(fim_context(s), s, opt);
}

/// d Theta / d X per target, laid out as [[dth/dx, dbeta/dx], [dth/dy, dbeta/dy]] (+) I2.
inline Eigen::Matrix4d target_jacobian(const TargetParams& t, const RadarConfig& radar) {
  const Vec2 xy = cartesian_from_params(t, radar);
  const double r2 = xy.squaredNorm();
  if (r2 == 0.0) throw ZeroRangeError();
  const double r = std::sqrt(r2);
  Eigen::Matrix4d g = Eigen::Matrix4d::Identity();
  g(0, 0) = -xy.y() / r2;
  g(1, 0) = xy.x() / r2;
  g(0, 1) = xy.x() / (r * radar.bin_width_m);
  g(1, 1) = xy.y() / (r * radar.bin_width_m);
  return g;
}

inline Eigen::MatrixXd system_matrix(const Scenario& s) {
  const auto t = static_cast<Eigen::Index>(s.targets.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4 * t, 4 * t);
  for (Eigen::Index i = 0; i < t; ++i)
    g.block<4, 4>(4 * i, 4 * i) = target_jacobian(s.targets[static_cast<std::size_t>(i)], s.radar);
  return g;
}

struct FimMetrics {
  double trace = 0.0;
  double det = 0.0;
  double max_eig = 0.0;
  double cond = 0.0;
};

struct FimReport {
  Eigen::MatrixXd parameter_fim;
  Eigen::MatrixXd system;
  Eigen::MatrixXd state_fim;
  Eigen::MatrixXd crlb;
  FimMetrics metrics;
  /// 2x2 position blocks of the bound, one per target, and the sum of their traces.
  std::vector<Eigen::Matrix2d> position_blocks;
  double position_trace = 0.0;
  /// Ridge added to the state FIM (0 unless requested).
  double ridge = 0.0;
};

/// Inverse of a symmetric information matrix with a conditioning check.
/// Returns the inverse and fills `metrics` (metrics describe the inverse).
inline Eigen::MatrixXd invert_information(const Eigen::MatrixXd& j, FimMetrics& metrics, double max_condition) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
  const auto& ev = eig.eigenvalues();
  const double lo = ev.size() ? ev.minCoeff() : 1.0, hi = ev.size() ? ev.maxCoeff() : 1.0;
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition) || !std::isfinite(hi))
    throw SingularFim(cond, lo, hi, static_cast<long>(j.rows()));
  const Eigen::MatrixXd inv = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  metrics.cond = cond;
  metrics.trace = ev.cwiseInverse().sum();
  metrics.det = ev.cwiseInverse().prod();
  metrics.max_eig = 1.0 / lo;
  return 0.5 * (inv + inv.transpose());
}

inline FimReport state_fim_and_crlb(const Scenario& s, const FimOptions& opt = {}) {
  FimReport rep;
  rep.parameter_fim = assemble_parameter_fim(s, opt);
  rep.system = system_matrix(s);
  rep.state_fim = rep.system * rep.parameter_fim * rep.system.transpose();
  rep.state_fim = 0.5 * (rep.state_fim + rep.state_fim.transpose());
  Eigen::MatrixXd j = rep.state_fim;
  if (opt.ridge && j.rows() > 0) {
    rep.ridge = 1e-10 * j.trace() / static_cast<double>(j.rows());
    j.diagonal().array() += rep.ridge;
  }
  rep.crlb = invert_information(j, rep.metrics, opt.max_condition);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s.targets.size()); ++i) {
    rep.position_blocks.push_back(rep.crlb.block<2, 2>(4 * i, 4 * i));
    rep.position_trace += rep.position_blocks.back().trace();
  }
  return rep;
}

/// Parameter-space bound (inverse of the parameter FIM), no chain rule.
inline Eigen::MatrixXd parameter_crlb(const Scenario& s, const FimOptions& opt = {}) {
  FimMetrics m;
  return invert_information(assemble_parameter_fim(s, opt), m, opt.max_condition);
}

// ---------------------------------------------------------------------------
// Finite-difference oracle on the full stacked model

namespace detail {

inline double& param_ref(TargetParams& t, int k) {
  switch (k) {
    case 0: return t.doa_rad;
    case 1: return t.ratio;
    case 2: return t.amp_re;
    default: return t.amp_im;
  }
}

}  // namespace detail

/// Gaussian FIM by central differences of the dense mean and covariance,
/// one Richardson step, default step 1e-6 for every parameter.
inline Eigen::MatrixXd numerical_fim_oracle(const Scenario& s, double h = 1e-6) {
  const auto layout = layout_of(s);
  const Omega om = omega_matrix(s.array, s.radar);
  const auto n = static_cast<Eigen::Index>(4 * s.targets.size());

  auto mean_at = [&](const std::vector<TargetParams>& ts) { return mean_vector(layout, ts, om, s.radar); };
  auto cov_at = [&](const std::vector<TargetParams>& ts) {
    CovarianceModel c{layout, covariance_factor(layout, ratios_of(ts), s.radar)};
    return c.dense();
  };
  auto central = [&](auto&& f, Eigen::Index i, double step) {
    auto plus = s.targets, minus = s.targets;
    detail::param_ref(plus[static_cast<std::size_t>(i / 4)], static_cast<int>(i % 4)) += step;
    detail::param_ref(minus[static_cast<std::size_t>(i / 4)], static_cast<int>(i % 4)) -= step;
    return Eigen::MatrixXd((f(plus) - f(minus)) / (2.0 * step));
  };
  auto richardson = [&](auto&& f, Eigen::Index i) {
    return Eigen::MatrixXd((4.0 * central(f, i, h / 2) - central(f, i, h)) / 3.0);
  };

  const Eigen::MatrixXd sigma = cov_at(s.targets);
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  std::vector<Eigen::MatrixXd> dmu, dsig;
  for (Eigen::Index i = 0; i < n; ++i) {
    dmu.push_back(richardson(mean_at, i));
    dsig.push_back(richardson(cov_at, i));
  }
  std::vector<Eigen::MatrixXd> wmu, wsig;
  for (Eigen::Index i = 0; i < n; ++i) {
    wmu.push_back(llt.solve(dmu[static_cast<std::size_t>(i)]));
    wsig.push_back(llt.solve(dsig[static_cast<std::size_t>(i)]));
  }
  Eigen::MatrixXd j(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      const double mean_term = (dmu[ua].transpose() * wmu[ub])(0, 0);
      const double cov_term = 0.5 * (wsig[ua].cwiseProduct(wsig[ub].transpose())).sum();
      j(a, b) = mean_term + cov_term;
    }
  return 0.5 * (j + j.transpose());
}

}  // namespace mimoplace
