#pragma once

// Small dense block SDP solver.
//
//   primal:  min <C, X>   s.t. <A_i, X> = b_i,  X psd
//   dual:    max b'y      s.t. Z = C - sum_i y_i A_i psd
//
// Every matrix is block diagonal with tiny blocks. Infeasible-start
// primal-dual path following with the HKM direction and Mehrotra's
// predictor-corrector; the Schur complement is dense.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mimoplace/errors.hpp"

namespace mimoplace {

using BlockMatrix = std::vector<Eigen::MatrixXd>;

/// One term of a constraint matrix: a symmetric matrix living in block `block`.
struct BlockEntry {
  int block = 0;
  Eigen::MatrixXd value;
};

struct SdpData {
  std::vector<int> block_sizes;
  BlockMatrix c;                             // one dense block per entry of block_sizes
  std::vector<std::vector<BlockEntry>> a;   // a[i] = sparse list of blocks of A_i
  Eigen::VectorXd b;

  int num_constraints() const { return static_cast<int>(a.size()); }
};

struct SdpOptions {
  double tol = 1e-8;
  int max_iterations = 200;
  double step_fraction = 0.95;
  double initial_scale = 0.0;  // 0 picks a scale from the data
};

enum class SdpStatus { kOptimal, kMaxIterations, kNumericalFailure };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal: return "optimal";
    case SdpStatus::kMaxIterations: return "max_iterations";
    case SdpStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

struct SdpResult {
  SdpStatus status = SdpStatus::kNumericalFailure;
  BlockMatrix x;
  BlockMatrix z;
  Eigen::VectorXd y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double relative_gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
};

namespace sdp_detail {

inline double inner(const BlockMatrix& a, const BlockMatrix& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
  return s;
}

inline double norm(const BlockMatrix& a) { return std::sqrt(inner(a, a)); }

inline BlockMatrix scaled_identity(const std::vector<int>& sizes, double v) {
  BlockMatrix out;
  for (int n : sizes) out.push_back(v * Eigen::MatrixXd::Identity(n, n));
  return out;
}

inline double contract(const std::vector<BlockEntry>& ai, const BlockMatrix& x) {
  double s = 0.0;
  for (const auto& e : ai) s += e.value.cwiseProduct(x[static_cast<std::size_t>(e.block)]).sum();
  return s;
}

/// Largest step alpha in (0, inf] keeping x + alpha dx psd, block by block.
inline double max_step(const BlockMatrix& x, const BlockMatrix& dx) {
  double alpha = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < x.size(); ++k) {
    Eigen::LLT<Eigen::MatrixXd> llt(x[k]);
    if (llt.info() != Eigen::Success) return 0.0;
    const Eigen::MatrixXd linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(x[k].rows(), x[k].cols()));
    Eigen::MatrixXd m = linv * dx[k] * linv.transpose();
    m = 0.5 * (m + m.transpose());
    const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (lo < 0.0) alpha = std::min(alpha, -1.0 / lo);
  }
  return alpha;
}

inline BlockMatrix sym(BlockMatrix m) {
  for (auto& b : m) b = 0.5 * (b + b.transpose());
  return m;
}

}  // namespace sdp_detail

inline SdpResult solve_block_sdp(const SdpData& d, const SdpOptions& opt = {}) {
  using namespace sdp_detail;
  const auto nblk = d.block_sizes.size();
  const int m = d.num_constraints();
  int dim = 0;
  for (int n : d.block_sizes) dim += n;

  double scale = opt.initial_scale;
  if (!(scale > 0.0)) {
    double big = 1.0;
    for (const auto& c : d.c) big = std::max(big, c.cwiseAbs().maxCoeff());
    big = std::max(big, d.b.size() ? d.b.cwiseAbs().maxCoeff() : 0.0);
    scale = 10.0 * big;
  }
  SdpResult r;
  r.x = scaled_identity(d.block_sizes, scale);
  r.z = scaled_identity(d.block_sizes, scale);
  r.y = Eigen::VectorXd::Zero(m);

  const double norm_b = d.b.norm(), norm_c = norm(d.c);

  auto dual_residual = [&](const BlockMatrix& z, const Eigen::VectorXd& y) {
    BlockMatrix rd = d.c;
    for (std::size_t k = 0; k < nblk; ++k) rd[k] -= z[k];
    for (int i = 0; i < m; ++i)
      for (const auto& e : d.a[static_cast<std::size_t>(i)]) rd[static_cast<std::size_t>(e.block)] -= y[i] * e.value;
    return rd;
  };

  for (int it = 0; it <= opt.max_iterations; ++it) {
    Eigen::VectorXd rp(m);
    for (int i = 0; i < m; ++i) rp[i] = d.b[i] - contract(d.a[static_cast<std::size_t>(i)], r.x);
    const BlockMatrix rd = dual_residual(r.z, r.y);
    r.primal_objective = inner(d.c, r.x);
    r.dual_objective = d.b.dot(r.y);
    r.relative_gap = std::abs(r.primal_objective - r.dual_objective) /
                     (1.0 + std::abs(r.primal_objective) + std::abs(r.dual_objective));
    r.primal_infeasibility = rp.norm() / (1.0 + norm_b);
    r.dual_infeasibility = norm(rd) / (1.0 + norm_c);
    r.iterations = it;
    if (r.relative_gap <= opt.tol && r.primal_infeasibility <= opt.tol && r.dual_infeasibility <= opt.tol) {
      r.status = SdpStatus::kOptimal;
      return r;
    }
    if (it == opt.max_iterations) break;

    // Z^-1 per block and the HKM Schur matrix M_ij = sum_k tr(A_ik X_k A_jk Z_k^-1).
    BlockMatrix zinv(nblk);
    for (std::size_t k = 0; k < nblk; ++k) {
      Eigen::LLT<Eigen::MatrixXd> llt(r.z[k]);
      if (llt.info() != Eigen::Success) {
        r.status = SdpStatus::kNumericalFailure;
        return r;
      }
      zinv[k] = llt.solve(Eigen::MatrixXd::Identity(r.z[k].rows(), r.z[k].cols()));
    }
    std::vector<std::vector<std::pair<int, const Eigen::MatrixXd*>>> by_block(nblk);
    for (int i = 0; i < m; ++i)
      for (const auto& e : d.a[static_cast<std::size_t>(i)])
        by_block[static_cast<std::size_t>(e.block)].push_back({i, &e.value});
    Eigen::MatrixXd schur = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = 0; k < nblk; ++k) {
      const auto& list = by_block[k];
      std::vector<Eigen::MatrixXd> ax, az;
      for (const auto& [i, a] : list) {
        ax.push_back(*a * r.x[k]);
        az.push_back(*a * zinv[k]);
      }
      for (std::size_t p = 0; p < list.size(); ++p)
        for (std::size_t q = p; q < list.size(); ++q) {
          const double v = ax[p].cwiseProduct(az[q].transpose()).sum();
          schur(list[p].first, list[q].first) += v;
          if (q != p) schur(list[q].first, list[p].first) += v;
        }
    }
    Eigen::LDLT<Eigen::MatrixXd> factor(0.5 * (schur + schur.transpose()));
    if (factor.info() != Eigen::Success) {
      r.status = SdpStatus::kNumericalFailure;
      return r;
    }
    const double mu = inner(r.x, r.z) / dim;

    // X Rd Z^-1 is shared by predictor and corrector.
    BlockMatrix xrz(nblk);
    for (std::size_t k = 0; k < nblk; ++k) xrz[k] = r.x[k] * rd[k] * zinv[k];

    auto direction = [&](const BlockMatrix& g, Eigen::VectorXd& dy, BlockMatrix& dx, BlockMatrix& dz) {
      Eigen::VectorXd rhs(m);
      for (int i = 0; i < m; ++i) {
        const auto& ai = d.a[static_cast<std::size_t>(i)];
        rhs[i] = rp[i] - contract(ai, g) + contract(ai, xrz);
      }
      dy = factor.solve(rhs);
      dz = rd;
      for (int i = 0; i < m; ++i)
        for (const auto& e : d.a[static_cast<std::size_t>(i)]) dz[static_cast<std::size_t>(e.block)] -= dy[i] * e.value;
      dx.resize(nblk);
      for (std::size_t k = 0; k < nblk; ++k) dx[k] = g[k] - r.x[k] * dz[k] * zinv[k];
      dx = sym(dx);
    };

    // Predictor: sigma = 0, g = -X.
    BlockMatrix g(nblk);
    for (std::size_t k = 0; k < nblk; ++k) g[k] = -r.x[k];
    Eigen::VectorXd dy;
    BlockMatrix dx, dz;
    direction(g, dy, dx, dz);
    const double ap = std::min(1.0, max_step(r.x, dx)), ad = std::min(1.0, max_step(r.z, dz));
    BlockMatrix xa = r.x, za = r.z;
    for (std::size_t k = 0; k < nblk; ++k) {
      xa[k] += ap * dx[k];
      za[k] += ad * dz[k];
    }
    const double mu_aff = inner(xa, za) / dim;
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    // Corrector: g = sigma mu Z^-1 - X - dX_a dZ_a Z^-1.
    for (std::size_t k = 0; k < nblk; ++k) g[k] = sigma * mu * zinv[k] - r.x[k] - dx[k] * dz[k] * zinv[k];
    direction(g, dy, dx, dz);
    const double sp = std::min(1.0, opt.step_fraction * max_step(r.x, dx));
    const double sd = std::min(1.0, opt.step_fraction * max_step(r.z, dz));
    if (!(sp > 0.0) || !(sd > 0.0) || !dy.allFinite()) {
      r.status = SdpStatus::kNumericalFailure;
      return r;
    }
    for (std::size_t k = 0; k < nblk; ++k) {
      r.x[k] += sp * dx[k];
      r.z[k] += sd * dz[k];
    }
    r.x = sym(std::move(r.x));
    r.z = sym(std::move(r.z));
    r.y += sd * dy;
  }
  r.status = SdpStatus::kMaxIterations;
  return r;
}

}  // namespace mimoplace
