#pragma once

// Monte-Carlo localisation: a maximum-likelihood estimator over the stacked
// Gaussian model, RMSE experiments, and CRLB sweeps across geometries.
//
// Amplitudes enter the mean linearly, so for fixed (theta, beta) of every
// target they are solved in closed form by weighted least squares and the
// search runs over the concentrated likelihood.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mimoplace/errors.hpp"
#include "mimoplace/fim_crlb.hpp"
#include "mimoplace/multi_target.hpp"
#include "mimoplace/scenario.hpp"
#include "mimoplace/signal_model.hpp"
#include "mimoplace/single_target_sdp.hpp"

namespace mimoplace {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Reference geometries

/// Uniform linear array along the x axis, centred, with the given spacing.
/// Separate mode lays out transmitters first, then receivers, on one line.
inline ArrayGeometry ula(int m, ArrayMode mode, double spacing, int n = 0) {
  const int count = mode == ArrayMode::kTransceiver ? m : m + n;
  std::vector<Vec2> pos(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) pos[static_cast<std::size_t>(i)] = {(i - 0.5 * (count - 1)) * spacing, 0.0};
  ArrayGeometry g;
  if (mode == ArrayMode::kTransceiver) {
    g = ArrayGeometry::transceiver(pos);
  } else {
    g = ArrayGeometry::separate({pos.begin(), pos.begin() + m}, {pos.begin() + m, pos.end()});
  }
  g.centered = true;
  return g;
}

inline ArrayGeometry half_wavelength_ula(const ArrayGeometry& shape, const RadarConfig& radar) {
  return ula(static_cast<int>(shape.num_tx()), shape.mode, 0.5 * radar.wavelength_m, static_cast<int>(shape.num_rx()));
}

/// T targets in one cell with DOAs spread over [-pi/3, pi/3] and ratios over [.33, .66].
inline std::vector<TargetParams> spread_targets(int count, int cell, double amp_re, double amp_im) {
  std::vector<TargetParams> out;
  for (int t = 0; t < count; ++t) {
    const double f = count == 1 ? 0.0 : static_cast<double>(t) / (count - 1);
    out.push_back({cell, -kPi / 3 + f * 2 * kPi / 3, 0.33 + f * 0.33, amp_re, amp_im});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concentrated likelihood

struct EstimatorGrid {
  double theta_step = 0.2 * kPi / 180.0;
  double beta_step = 0.01;
  /// Search interval for the single-target DOA grid.
  double theta_lo = -kPi;
  double theta_hi = kPi;
  /// Half-width, in grid steps, of the local windows of the multi-target path.
  int window = 10;
  int refine_rounds = 3;
  int max_sweeps = 4;
  /// Iterations of the joint quasi-Newton polish after the sweeps.
  int polish_iterations = 200;
  /// Log-likelihood change that ends the coordinate ascent.
  double tolerance = 1e-7;

  static EstimatorGrid front_sector() {
    EstimatorGrid g;
    g.theta_lo = -kPi / 2;
    g.theta_hi = kPi / 2;
    return g;
  }
};

/// Measurement in complex form (paths x bins) with the cached pieces of the likelihood.
struct MlProblem {
  ModelLayout layout;
  Omega omega;
  RadarConfig radar;
  Eigen::MatrixXcd y;
  Eigen::MatrixXd gram_re;  // Re(Y^H Y)
};

inline MlProblem ml_problem(const MeasurementVector& m, const Scenario& s) {
  MlProblem p;
  p.layout = layout_of(s);
  if (m.rho.size() != p.layout.dim())
    throw DimensionMismatch("measurement has " + std::to_string(m.rho.size()) + " entries, model expects " +
                            std::to_string(p.layout.dim()));
  p.omega = omega_matrix(s.array, s.radar);
  p.radar = s.radar;
  const int paths = p.layout.paths, bins = p.layout.num_bins();
  p.y.resize(paths, bins);
  for (int b = 0; b < bins; ++b)
    for (int l = 0; l < paths; ++l) p.y(l, b) = m.at(b + p.layout.first_bin(), l);
  p.gram_re = (p.y.adjoint() * p.y).real();
  return p;
}

inline Eigen::VectorXcd steering_vector(const MlProblem& p, double doa) {
  const double k = wavenumber(p.radar), root_k = std::sqrt(static_cast<double>(p.radar.snapshots));
  const Eigen::ArrayXd phase = k * (look_vector(doa).transpose() * p.omega).transpose().array();
  Eigen::VectorXcd psi(phase.size());
  for (Eigen::Index l = 0; l < phase.size(); ++l) psi[l] = root_k * cplx(std::cos(phase[l]), std::sin(phase[l]));
  return psi;
}

inline Eigen::VectorXd bin_weight_vector(const ModelLayout& layout, int rel_cell, double beta) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(layout.num_bins());
  if (layout.has_bin(rel_cell)) u[layout.slot(rel_cell)] = beta;
  if (layout.has_bin(rel_cell - 1)) u[layout.slot(rel_cell - 1)] = 1.0 - beta;
  return u;
}

struct ConcentratedFit {
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::vector<cplx> amplitudes;
};

/// Log-likelihood maximised over all complex amplitudes for fixed DOAs and ratios.
inline ConcentratedFit concentrated_fit(const MlProblem& p, const std::vector<double>& doas,
                                        const std::vector<double>& ratios) {
  const auto t = doas.size();
  const auto factor = covariance_factor(p.layout, ratios, p.radar);
  Eigen::LLT<Eigen::MatrixXd> llt(factor);
  const Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(factor.rows(), factor.cols()));
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();

  std::vector<Eigen::VectorXcd> psi(t);
  std::vector<Eigen::VectorXd> u(t);
  Eigen::VectorXcd b(static_cast<Eigen::Index>(t));
  for (std::size_t i = 0; i < t; ++i) {
    psi[i] = steering_vector(p, doas[i]);
    u[i] = bin_weight_vector(p.layout, p.layout.target_cells[i], ratios[i]);
    const Eigen::VectorXcd z = p.y * (w * u[i]).cast<cplx>();
    b[static_cast<Eigen::Index>(i)] = psi[i].dot(z);  // psi^H z
  }
  Eigen::MatrixXcd a(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t));
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = u[i].dot(w * u[j]) * psi[i].dot(psi[j]);
  const Eigen::VectorXcd alpha = a.completeOrthogonalDecomposition().solve(b);

  const double q0 = w.cwiseProduct(p.gram_re).sum();
  const double quad = q0 - std::real(b.dot(alpha));
  const double n = static_cast<double>(p.layout.dim());
  ConcentratedFit fit;
  fit.log_likelihood = -0.5 * (n * std::log(2.0 * kPi) + static_cast<double>(p.layout.block_dim()) * logdet + quad);
  for (Eigen::Index i = 0; i < alpha.size(); ++i) fit.amplitudes.push_back(alpha[i]);
  return fit;
}

namespace ml_detail {

/// Golden-section maximisation of f on [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b, int iters = 45) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters && (b - a) > 1e-13 * std::max(1.0, std::abs(a)); ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

/// Quasi-Newton ascent with central-difference gradients and backtracking.
inline Eigen::VectorXd bfgs_maximize(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                     int max_iterations, double h = 1e-5) {
  const Eigen::Index n = x.size();
  auto grad = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd a = v, b = v;
      a[i] += h;
      b[i] -= h;
      g[i] = (f(a) - f(b)) / (2 * h);
    }
    return g;
  };
  double fx = f(x);
  Eigen::VectorXd g = grad(x);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < max_iterations && g.norm() > 1e-8; ++it) {
    Eigen::VectorXd dir = hinv * g;
    if (dir.dot(g) <= 0.0) {
      hinv.setIdentity();
      dir = g;
    }
    double t = 1.0, fn = fx;
    Eigen::VectorXd xn = x;
    bool ok = false;
    for (int k = 0; k < 40; ++k, t *= 0.5) {
      xn = x + t * dir;
      fn = f(xn);
      if (fn >= fx + 1e-4 * t * g.dot(dir)) {
        ok = true;
        break;
      }
    }
    if (!ok) break;
    const Eigen::VectorXd gn = grad(xn);
    const Eigen::VectorXd sv = xn - x, yv = g - gn;  // curvature of -f
    const double sy = sv.dot(yv);
    if (sy > 1e-12 * sv.norm() * yv.norm()) {
      const double r = 1.0 / sy;
      const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n) - r * sv * yv.transpose();
      hinv = v * hinv * v.transpose() + r * sv * sv.transpose();
    }
    const double gain = fn - fx;
    x = xn;
    fx = fn;
    g = gn;
    if (gain < 1e-12) break;
  }
  return x;
}

}  // namespace ml_detail

struct TargetEstimate {
  int cell = 1;
  double doa_rad = 0.0;
  double ratio = 0.0;
  cplx amplitude;
  Vec2 position = Vec2::Zero();
};

struct MlEstimate {
  std::vector<TargetEstimate> targets;
  double log_likelihood = 0.0;
  int sweeps = 0;
};

/// Maximum-likelihood estimate. Uses the number of targets and their cells
/// from `s`; with several targets the remaining fields of `s.targets` are the
/// starting point of the coordinate ascent.
inline MlEstimate ml_estimate(const MeasurementVector& m, const Scenario& s, const EstimatorGrid& grid = {}) {
  const auto p = ml_problem(m, s);
  const auto t = s.targets.size();
  if (t == 0) return {};
  std::vector<double> th(t), be(t);

  // Golden-section polish of one target around a grid node. On the global
  // grid a move beyond one cell means the grid missed the peak; local windows
  // are re-centred by the next sweep instead.
  auto refine = [&](std::size_t i, double theta0, double beta0, bool strict) {
    auto eval = [&](double a, double b) {
      auto tt = th, bb = be;
      tt[i] = a;
      bb[i] = b;
      return concentrated_fit(p, tt, bb).log_likelihood;
    };
    double a = theta0, b = beta0;
    for (int r = 0; r < grid.refine_rounds; ++r) {
      a = ml_detail::golden_max([&](double v) { return eval(v, b); }, theta0 - 2 * grid.theta_step,
                                theta0 + 2 * grid.theta_step);
      b = ml_detail::golden_max([&](double v) { return eval(a, v); }, std::max(0.0, beta0 - 2 * grid.beta_step),
                                std::min(1.0, beta0 + 2 * grid.beta_step));
    }
    if (strict &&
        (std::abs(a - theta0) > grid.theta_step * (1 + 1e-9) || std::abs(b - beta0) > grid.beta_step * (1 + 1e-9)))
      throw GridTooCoarse("refinement left the grid cell around the best node");
    th[i] = a;
    be[i] = b;
  };

  const int nb = static_cast<int>(std::floor(1.0 / grid.beta_step + 1e-9)) + 1;
  if (t == 1) {
    // Global grid. For one target the amplitude solve is a scalar projection.
    const int nt = static_cast<int>(std::floor((grid.theta_hi - grid.theta_lo) / grid.theta_step + 1e-9)) + 1;
    Eigen::MatrixXcd psi(p.layout.paths, nt);
    for (int k = 0; k < nt; ++k) psi.col(k) = steering_vector(p, grid.theta_lo + k * grid.theta_step);
    const double n = static_cast<double>(p.layout.dim());
    const double energy = static_cast<double>(p.radar.snapshots) * p.layout.paths;
    double best = -std::numeric_limits<double>::infinity();
    double bt = 0.0, bb = 0.0;
    for (int j = 0; j < nb; ++j) {
      const double beta = std::min(1.0, j * grid.beta_step);
      const auto factor = covariance_factor(p.layout, {beta}, p.radar);
      Eigen::LLT<Eigen::MatrixXd> llt(factor);
      const Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(factor.rows(), factor.cols()));
      const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      const Eigen::VectorXd u = bin_weight_vector(p.layout, p.layout.target_cells[0], beta);
      const double q = u.dot(w * u);
      if (!(q > 0.0)) continue;
      const Eigen::VectorXcd z = p.y * (w * u).cast<cplx>();
      const Eigen::VectorXd score = (psi.adjoint() * z).cwiseAbs2() / (q * energy);
      const double q0 = w.cwiseProduct(p.gram_re).sum();
      Eigen::Index k;
      const double top = score.maxCoeff(&k);
      const double ll = -0.5 * (n * std::log(2.0 * kPi) + static_cast<double>(p.layout.block_dim()) * logdet + q0 - top);
      if (ll > best) {
        best = ll;
        bt = grid.theta_lo + static_cast<double>(k) * grid.theta_step;
        bb = beta;
      }
    }
    th[0] = bt;
    be[0] = bb;
    refine(0, bt, bb, true);
  } else {
    for (std::size_t i = 0; i < t; ++i) {
      th[i] = s.targets[i].doa_rad;
      be[i] = std::clamp(s.targets[i].ratio, 0.0, 1.0);
    }
  }

  MlEstimate est;
  double ll = concentrated_fit(p, th, be).log_likelihood;
  if (t > 1) {
    // Coordinate ascent. A target gets a window search on the first sweep and
    // whenever its last polish drifted more than one step; otherwise the
    // polish alone is enough.
    std::vector<bool> search(t, true);
    for (int sweep = 0; sweep < grid.max_sweeps; ++sweep) {
      ++est.sweeps;
      const double before = ll;
      for (std::size_t i = 0; i < t; ++i) {
        double bt = th[i], bb = be[i];
        if (search[i]) {
          double best = -std::numeric_limits<double>::infinity();
          const double t0 = th[i], b0 = be[i];
          for (int a = -grid.window; a <= grid.window; ++a)
            for (int c = -grid.window; c <= grid.window; ++c) {
              const double beta = b0 + c * grid.beta_step;
              if (beta < 0.0 || beta > 1.0) continue;
              auto tt = th, bv = be;
              tt[i] = t0 + a * grid.theta_step;
              bv[i] = beta;
              const double v = concentrated_fit(p, tt, bv).log_likelihood;
              if (v > best) {
                best = v;
                bt = tt[i];
                bb = beta;
              }
            }
          th[i] = bt;
          be[i] = bb;
        }
        refine(i, bt, bb, false);
        search[i] = std::abs(th[i] - bt) > grid.theta_step || std::abs(be[i] - bb) > grid.beta_step;
      }
      ll = concentrated_fit(p, th, be).log_likelihood;
      const bool pending = std::find(search.begin(), search.end(), true) != search.end();
      if (!pending && std::abs(ll - before) < grid.tolerance) break;
    }
    // Joint polish in grid-step units; ratios are clamped into the cell.
    Eigen::VectorXd x(2 * static_cast<Eigen::Index>(t));
    for (std::size_t i = 0; i < t; ++i) {
      x[2 * static_cast<Eigen::Index>(i)] = th[i] / grid.theta_step;
      x[2 * static_cast<Eigen::Index>(i) + 1] = be[i] / grid.beta_step;
    }
    auto unpack = [&](const Eigen::VectorXd& v, std::vector<double>& tt, std::vector<double>& bb) {
      for (std::size_t i = 0; i < t; ++i) {
        tt[i] = v[2 * static_cast<Eigen::Index>(i)] * grid.theta_step;
        bb[i] = std::clamp(v[2 * static_cast<Eigen::Index>(i) + 1] * grid.beta_step, 0.0, 1.0);
      }
    };
    auto joint = [&](const Eigen::VectorXd& v) {
      std::vector<double> tt(t), bb(t);
      unpack(v, tt, bb);
      return concentrated_fit(p, tt, bb).log_likelihood;
    };
    x = ml_detail::bfgs_maximize(joint, x, grid.polish_iterations);
    std::vector<double> tt(t), bb(t);
    unpack(x, tt, bb);
    if (concentrated_fit(p, tt, bb).log_likelihood > ll) {
      th = tt;
      be = bb;
    }
  }

  const auto fit = concentrated_fit(p, th, be);
  est.log_likelihood = fit.log_likelihood;
  for (std::size_t i = 0; i < t; ++i) {
    TargetEstimate e;
    e.cell = s.targets[i].cell;
    e.doa_rad = wrap_angle(th[i]);
    e.ratio = be[i];
    e.amplitude = fit.amplitudes[i];
    e.position = cartesian_from_params({e.cell, e.doa_rad, e.ratio, e.amplitude.real(), e.amplitude.imag()}, s.radar);
    est.targets.push_back(e);
  }
  return est;
}

// ---------------------------------------------------------------------------
// RMSE experiments

/// SNR in dB of a target: 10 log10(K |alpha|^2 / sigma_w^2).
inline double target_snr_db(const TargetParams& t, const RadarConfig& r) {
  return 10.0 * std::log10(r.snapshots * (t.amp_re * t.amp_re + t.amp_im * t.amp_im) / r.noise_var);
}

/// Rescales the amplitude (phase kept) so the target sits at `snr_db`.
inline TargetParams with_snr(TargetParams t, double snr_db, const RadarConfig& r) {
  const double target_mag = std::sqrt(r.noise_var * std::pow(10.0, snr_db / 10.0) / r.snapshots);
  const double mag = std::hypot(t.amp_re, t.amp_im);
  if (mag > 0.0) {
    t.amp_re *= target_mag / mag;
    t.amp_im *= target_mag / mag;
  } else {
    t.amp_re = target_mag;
  }
  return t;
}

struct McConfig {
  std::vector<double> snr_db{20.0};
  int trials = 100;
  std::uint64_t seed = 0;
  EstimatorGrid grid = EstimatorGrid::front_sector();
  /// Std of the Cartesian perturbation that starts the multi-target ascent; <= 0 means r_bin / 10.
  double init_std_m = 0.0;
  /// Polled before each SNR point; returning true ends the run with the points done so far.
  std::function<bool()> interrupted;
};

struct EstimationResult {
  double snr_db = 0.0;
  int trials = 0;
  int failures = 0;
  std::vector<double> rmse_m;
  std::vector<double> rmse_se_m;
  std::vector<double> crlb_m;
  /// estimates[trial][target]; failed trials are left empty.
  std::vector<std::vector<Vec2>> estimates;
};

inline std::vector<TargetParams> perturbed_start(const Scenario& s, std::mt19937_64& rng, double std_m) {
  std::normal_distribution<double> normal(0.0, std_m);
  std::vector<TargetParams> out = s.targets;
  for (auto& t : out) {
    const Vec2 xy = cartesian_from_params(t, s.radar) + Vec2(normal(rng), normal(rng));
    const double r = xy.norm();
    t.doa_rad = std::atan2(xy.y(), xy.x());
    t.ratio = std::clamp((r - (t.cell - 1) * s.radar.bin_width_m) / s.radar.bin_width_m, 0.0, 1.0);
  }
  return out;
}

inline std::vector<EstimationResult> rmse_experiment(const Scenario& s, const McConfig& cfg) {
  if (cfg.trials < 1) throw InvalidScenario("trials must be >= 1");
  const double init_std = cfg.init_std_m > 0.0 ? cfg.init_std_m : s.radar.bin_width_m / 10.0;
  std::vector<EstimationResult> out;
  for (std::size_t k = 0; k < cfg.snr_db.size(); ++k) {
    if (cfg.interrupted && cfg.interrupted()) break;
    Scenario at = s;
    for (auto& t : at.targets) t = with_snr(t, cfg.snr_db[k], s.radar);
    const auto truth = at.targets;
    EstimationResult res;
    res.snr_db = cfg.snr_db[k];
    res.trials = cfg.trials;
    try {
      const auto rep = state_fim_and_crlb(at);
      for (const auto& blk : rep.position_blocks) res.crlb_m.push_back(std::sqrt(blk.trace()));
    } catch (const SingularFim&) {
      // No bound exists; the trials still run.
      res.crlb_m.assign(at.targets.size(), std::numeric_limits<double>::infinity());
    }
    const auto nt = truth.size();
    std::vector<std::vector<double>> sq(nt);
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const auto stream = static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(cfg.trials) +
                          static_cast<std::uint64_t>(trial);
      const auto y = sample_measurement(at, cfg.seed, stream);
      Scenario guess = at;
      if (nt > 1) {
        auto rng = restart_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull, stream);
        guess.targets = perturbed_start(at, rng, init_std);
      }
      try {
        const auto est = ml_estimate(y, guess, cfg.grid);
        std::vector<Vec2> pos;
        for (std::size_t i = 0; i < nt; ++i) {
          pos.push_back(est.targets[i].position);
          sq[i].push_back((est.targets[i].position - cartesian_from_params(truth[i], s.radar)).squaredNorm());
        }
        res.estimates.push_back(pos);
      } catch (const Error&) {
        ++res.failures;
        res.estimates.emplace_back();
      }
    }
    for (std::size_t i = 0; i < nt; ++i) {
      const auto n = static_cast<double>(sq[i].size());
      if (sq[i].empty()) {
        res.rmse_m.push_back(std::numeric_limits<double>::quiet_NaN());
        res.rmse_se_m.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      double mean = 0.0;
      for (double v : sq[i]) mean += v;
      mean /= n;
      double var = 0.0;
      for (double v : sq[i]) var += (v - mean) * (v - mean);
      var = n > 1 ? var / (n - 1) : 0.0;
      const double rmse = std::sqrt(mean);
      res.rmse_m.push_back(rmse);
      res.rmse_se_m.push_back(rmse > 0.0 ? std::sqrt(var) / (std::sqrt(n) * 2.0 * rmse) : 0.0);
    }
    out.push_back(std::move(res));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CRLB sweeps

enum class SweepAxis { kSpacing, kDeltaTheta, kAntennaCount, kTargetCount };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kSpacing: return "spacing";
    case SweepAxis::kDeltaTheta: return "dtheta";
    case SweepAxis::kAntennaCount: return "antenna_count";
    case SweepAxis::kTargetCount: return "target_count";
  }
  return "unknown";
}

struct SweepRow {
  double axis_value = 0.0;
  std::string geometry;
  double trace = 0.0;
  double det = 0.0;
  double max_eig = 0.0;
  /// Bound on the DOA of the first target (rad^2), parameter space.
  double doa_var = 0.0;
  bool singular = false;
};

struct SweepOptions {
  /// Any of "ula", "optimal", "random", "file".
  std::vector<std::string> geometries{"ula", "optimal"};
  std::optional<ArrayGeometry> user_geometry;
  SamplerConfig sampler;
  std::uint64_t seed = 0;
  /// Polled before each sweep point.
  std::function<bool()> interrupted;
};

inline SweepRow sweep_row(double v, const std::string& name, const Scenario& s) {
  SweepRow row;
  row.axis_value = v;
  row.geometry = name;
  try {
    const auto rep = state_fim_and_crlb(s);
    row.trace = rep.metrics.trace;
    row.det = rep.metrics.det;
    row.max_eig = rep.metrics.max_eig;
    row.doa_var = parameter_crlb(s)(0, 0);
  } catch (const SingularFim&) {
    row.singular = true;
    row.trace = row.det = row.max_eig = row.doa_var = std::numeric_limits<double>::infinity();
  }
  return row;
}

/// Optimised geometry for a scenario. A single target seen by transceivers
/// goes through the relaxation (the bound is a function of J_theta_theta
/// alone there); everything else runs the restart sampler.
inline ArrayGeometry optimal_geometry(const Scenario& s, const SamplerConfig& cfg) {
  if (s.targets.size() == 1 && s.array.mode == ArrayMode::kTransceiver) return place_single_target(s).geometry;
  return sample_restart_optimize(s, cfg).geometry;
}

/// One row per (axis value, geometry). On the spacing axis the geometry is a
/// linear array with that spacing and is reported as "ula".
inline std::vector<SweepRow> crlb_sweep(const Scenario& base, SweepAxis axis, const std::vector<double>& values,
                                        const SweepOptions& opt = {}) {
  if (base.targets.empty()) throw InvalidScenario("sweeps need at least one target");
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (opt.interrupted && opt.interrupted()) break;
    const double v = values[k];
    Scenario s = base;
    switch (axis) {
      case SweepAxis::kSpacing:
        s.array = ula(static_cast<int>(base.array.num_tx()), base.array.mode, v, static_cast<int>(base.array.num_rx()));
        rows.push_back(sweep_row(v, "ula", s));
        continue;
      case SweepAxis::kDeltaTheta: {
        TargetParams second = base.targets[0];
        second.doa_rad = wrap_angle(second.doa_rad + v);
        s.targets = {base.targets[0], second};
        break;
      }
      case SweepAxis::kAntennaCount: {
        const int m = static_cast<int>(std::lround(v));
        if (m < 1) throw InvalidScenario("antenna count must be >= 1");
        s.array = base.array.mode == ArrayMode::kTransceiver
                      ? ArrayGeometry::transceiver(std::vector<Vec2>(static_cast<std::size_t>(m)))
                      : ArrayGeometry::separate(std::vector<Vec2>(static_cast<std::size_t>(m)), base.array.rx);
        s.radar.powers_w.clear();
        break;
      }
      case SweepAxis::kTargetCount: {
        const int t = static_cast<int>(std::lround(v));
        if (t < 1) throw InvalidScenario("target count must be >= 1");
        s.targets = t == 1 ? std::vector<TargetParams>{base.targets[0]}
                           : spread_targets(t, base.targets[0].cell, base.targets[0].amp_re, base.targets[0].amp_im);
        break;
      }
    }
    for (const auto& name : opt.geometries) {
      Scenario g = s;
      if (name == "ula") {
        g.array = half_wavelength_ula(s.array, s.radar);
      } else if (name == "optimal") {
        g.array = optimal_geometry(s, opt.sampler);
      } else if (name == "random") {
        auto rng = restart_rng(opt.seed, k);
        g.array = random_feasible_geometry(s.array, s.constraints, rng);
      } else if (name == "file") {
        if (!opt.user_geometry) throw InvalidScenario("file geometry requested but none supplied");
        if (opt.user_geometry->num_tx() != s.array.num_tx() || opt.user_geometry->num_rx() != s.array.num_rx() ||
            opt.user_geometry->mode != s.array.mode)
          continue;
        g.array = *opt.user_geometry;
      } else {
        throw InvalidScenario("unknown geometry '" + name + "'");
      }
      rows.push_back(sweep_row(v, name, g));
    }
  }
  return rows;
}

}  // namespace mimoplace
