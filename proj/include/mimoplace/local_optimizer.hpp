#pragma once

// Ring-constrained local minimization over antenna positions.
//
// The joint centroid is eliminated (the last physical antenna is minus the
// sum of the others). Ring constraints d <= |ds| <= e enter as smooth
// quadratic hinge penalties on |ds|^2 with a growing multiplier; each round
// is a BFGS solve with central-difference gradients. A Gauss-Newton pass then
// pushes the result just inside every ring.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "mimoplace/scenario.hpp"

namespace mimoplace {

struct LocalOptions {
  /// Finite-difference step, in units of the length scale (the wavelength).
  double fd_step = 1e-6;
  int rounds = 4;
  double penalty_start = 1e2;
  double penalty_growth = 10.0;
  int max_iterations = 200;
  double grad_tol = 1e-9;
  /// Constraint tolerance (m) for reporting a geometry as feasible.
  double feasibility_tol = 1e-9;
};

struct LocalResult {
  std::vector<Vec2> antennas;
  double cost = std::numeric_limits<double>::infinity();
  double max_violation = 0.0;
  bool feasible = false;
  /// Some round ended because no Armijo step could be found.
  bool line_search_failed = false;
  int iterations = 0;
  int evaluations = 0;
};

namespace local_detail {

inline double ring_violation(const std::vector<Vec2>& ant, const std::vector<ConstrainedPair>& pairs) {
  double worst = 0.0;
  for (const auto& p : pairs) {
    const double dist = (ant[p.tx_ant] - ant[p.rx_ant]).norm();
    worst = std::max({worst, p.d - dist, dist - p.e});
  }
  return worst;
}

/// Maps reduced coordinates (units of `scale`) to centred antenna positions.
struct CentroidMap {
  std::size_t count = 0;
  double scale = 1.0;

  Eigen::Index dim() const { return count > 0 ? 2 * static_cast<Eigen::Index>(count - 1) : 0; }

  std::vector<Vec2> antennas(const Eigen::VectorXd& x) const {
    std::vector<Vec2> out(count, Vec2::Zero());
    Vec2 sum = Vec2::Zero();
    for (std::size_t i = 0; i + 1 < count; ++i) {
      out[i] = scale * x.segment<2>(2 * static_cast<Eigen::Index>(i));
      sum += out[i];
    }
    if (count > 0) out[count - 1] = -sum;
    return out;
  }

  Eigen::VectorXd reduce(std::vector<Vec2> ant) const {
    Vec2 mean = Vec2::Zero();
    for (const auto& a : ant) mean += a;
    if (!ant.empty()) mean /= static_cast<double>(ant.size());
    Eigen::VectorXd x(dim());
    for (std::size_t i = 0; i + 1 < count; ++i) x.segment<2>(2 * static_cast<Eigen::Index>(i)) = (ant[i] - mean) / scale;
    return x;
  }
};

}  // namespace local_detail

/// Moves a geometry onto the zero joint centroid by a common translation.
inline std::vector<Vec2> recentre(std::vector<Vec2> ant) {
  Vec2 mean = Vec2::Zero();
  for (const auto& a : ant) mean += a;
  if (!ant.empty()) mean /= static_cast<double>(ant.size());
  for (auto& a : ant) a -= mean;
  return ant;
}

/// Pushes a geometry inside every ring (bounds shrunk by `margin`) with
/// minimum-norm Gauss-Newton steps in the reduced coordinates.
inline std::vector<Vec2> repair_feasibility(const std::vector<Vec2>& ant, const std::vector<ConstrainedPair>& pairs,
                                            double scale, double margin, int max_steps = 50) {
  local_detail::CentroidMap map{ant.size(), scale};
  Eigen::VectorXd x = map.reduce(ant);
  for (int it = 0; it < max_steps; ++it) {
    const auto cur = map.antennas(x);
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> res;
    for (const auto& p : pairs) {
      const Vec2 ds = cur[p.tx_ant] - cur[p.rx_ant];
      const double dist = ds.norm();
      double r = 0.0, sign = 0.0;
      if (dist > p.e - margin) {
        r = dist - (p.e - margin);
        sign = 1.0;
      } else if (dist < p.d + margin) {
        r = (p.d + margin) - dist;
        sign = -1.0;
      }
      if (sign == 0.0) continue;
      // d dist / d x through the centroid map.
      Vec2 dir = dist > 0.0 ? Vec2(ds / dist) : Vec2(1.0, 0.0);
      Eigen::VectorXd row = Eigen::VectorXd::Zero(map.dim());
      auto add = [&](std::size_t a, double s) {
        if (a + 1 < map.count) {
          row.segment<2>(2 * static_cast<Eigen::Index>(a)) += s * scale * dir;
        } else {
          for (std::size_t i = 0; i + 1 < map.count; ++i)
            row.segment<2>(2 * static_cast<Eigen::Index>(i)) -= s * scale * dir;
        }
      };
      add(p.tx_ant, sign);
      add(p.rx_ant, -sign);
      rows.push_back(row);
      res.push_back(r);
    }
    if (rows.empty()) break;
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(rows.size()), map.dim());
    Eigen::VectorXd r(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      jac.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
      r[static_cast<Eigen::Index>(i)] = res[i];
    }
    const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-r);
    if (!step.allFinite()) break;
    x += step;
  }
  return map.antennas(x);
}

/// Minimizes `cost(antennas)` over centred geometries inside the rings.
/// `cost` may return +inf; such points are rejected by the line search.
template <class Cost>
LocalResult local_minimize(const std::vector<Vec2>& init, const std::vector<ConstrainedPair>& pairs, Cost&& cost,
                           double scale, const LocalOptions& opt = {}) {
  using local_detail::ring_violation;
  local_detail::CentroidMap map{init.size(), scale};
  LocalResult out;
  const std::vector<Vec2> start = recentre(init);

  auto evaluate = [&](const std::vector<Vec2>& ant) {
    ++out.evaluations;
    const double v = cost(ant);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  if (map.dim() == 0) {
    out.antennas = start;
    out.cost = evaluate(start);
    out.max_violation = ring_violation(start, pairs);
    out.feasible = out.max_violation <= opt.feasibility_tol;
    return out;
  }

  const double f_init = evaluate(start);
  const double weight = std::isfinite(f_init) && f_init != 0.0 ? std::abs(f_init) : 1.0;
  const double s2 = scale * scale;

  auto penalty = [&](const std::vector<Vec2>& ant) {
    double p = 0.0;
    for (const auto& pr : pairs) {
      const double q = (ant[pr.tx_ant] - ant[pr.rx_ant]).squaredNorm();
      const double lo = std::max(0.0, (pr.d * pr.d - q) / s2), hi = std::max(0.0, (q - pr.e * pr.e) / s2);
      p += lo * lo + hi * hi;
    }
    return p;
  };

  Eigen::VectorXd x = map.reduce(start);
  const Eigen::Index n = map.dim();
  double rho = opt.penalty_start;
  for (int round = 0; round < opt.rounds; ++round, rho *= opt.penalty_growth) {
    auto phi = [&](const Eigen::VectorXd& v) {
      const auto ant = map.antennas(v);
      return evaluate(ant) + rho * weight * penalty(ant);
    };
    auto gradient = [&](const Eigen::VectorXd& v, double fv) {
      Eigen::VectorXd g(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd a = v, b = v;
        a[i] += opt.fd_step;
        b[i] -= opt.fd_step;
        const double fa = phi(a), fb = phi(b);
        if (std::isfinite(fa) && std::isfinite(fb)) g[i] = (fa - fb) / (2 * opt.fd_step);
        else if (std::isfinite(fa)) g[i] = (fa - fv) / opt.fd_step;
        else if (std::isfinite(fb)) g[i] = (fv - fb) / opt.fd_step;
        else g[i] = 0.0;
      }
      return g;
    };

    double f = phi(x);
    if (!std::isfinite(f)) break;
    Eigen::VectorXd g = gradient(x, f);
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n) * std::min(1.0, 0.1 / std::max(g.norm(), 1e-300));
    int stalled = 0;
    for (int it = 0; it < opt.max_iterations; ++it) {
      ++out.iterations;
      if (g.lpNorm<Eigen::Infinity>() <= opt.grad_tol * std::max(1.0, std::abs(f))) break;
      Eigen::VectorXd dir = -h * g;
      if (dir.dot(g) >= 0.0) {
        h = Eigen::MatrixXd::Identity(n, n) * std::min(1.0, 0.1 / g.norm());
        dir = -h * g;
      }
      double t = 1.0, f_new = f;
      Eigen::VectorXd x_new = x;
      bool found = false;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        x_new = x + t * dir;
        f_new = phi(x_new);
        if (std::isfinite(f_new) && f_new <= f + 1e-4 * t * g.dot(dir)) {
          found = true;
          break;
        }
      }
      if (!found) {
        out.line_search_failed = true;
        break;
      }
      const Eigen::VectorXd g_new = gradient(x_new, f_new);
      const Eigen::VectorXd s = x_new - x, y = g_new - g;
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        if (it == 0) h = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
        const double r = 1.0 / sy;
        const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n) - r * s * y.transpose();
        h = v * h * v.transpose() + r * s * s.transpose();
      }
      const double decrease = f - f_new;
      x = x_new;
      f = f_new;
      g = g_new;
      stalled = decrease <= 1e-15 * std::max(1.0, std::abs(f)) ? stalled + 1 : 0;
      if (stalled >= 3 || s.norm() < 1e-13) break;
    }
  }

  double shrink = 0.0;
  for (const auto& p : pairs) shrink = std::max(shrink, p.e);
  out.antennas = repair_feasibility(map.antennas(x), pairs, scale, 1e-11 * std::max(shrink, scale));
  out.cost = evaluate(out.antennas);
  out.max_violation = ring_violation(out.antennas, pairs);
  out.feasible = out.max_violation <= opt.feasibility_tol;

  // A feasible start that is at least as good is a fixed point.
  const double v0 = ring_violation(start, pairs);
  if (v0 <= opt.feasibility_tol && std::isfinite(f_init) && (!out.feasible || f_init <= out.cost)) {
    out.antennas = start;
    out.cost = f_init;
    out.max_violation = v0;
    out.feasible = true;
  }
  return out;
}

}  // namespace mimoplace
