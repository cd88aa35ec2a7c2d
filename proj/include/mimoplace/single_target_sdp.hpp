#pragma once

// Single-target placement.
//
// For one target the DOA information of a centred array is governed by
// sum over pairs of (p' ds)^2 with p = [cos th, -sin th]. Lifting each pair
// difference ds into T >= ds ds' gives a convex program:
//
//   max  sum t
//   s.t. [[T, ds], [ds', 1]] psd         (T dominates ds ds')
//        [[I, ds], [ds', e^2]] psd        (|ds| <= e)
//        d^2 <= tr T <= e^2
//        t <= tr(T p p')
//        sum of all positions = 0
//
// Lengths are normalised by the largest e before solving. Positions are
// recovered from the principal eigenvectors of the T blocks and polished
// against the exact rings.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mimoplace/errors.hpp"
#include "mimoplace/local_optimizer.hpp"
#include "mimoplace/scenario.hpp"
#include "mimoplace/sdp_solver.hpp"
#include "mimoplace/signal_model.hpp"

namespace mimoplace {

struct SdpProblem {
  ArrayMode mode = ArrayMode::kTransceiver;
  int num_tx = 0;
  int num_rx = 0;
  double doa_rad = 0.0;
  Vec2 direction = Vec2::UnitX();  // p
  Eigen::Matrix2d projector = Eigen::Matrix2d::Zero();
  std::vector<ConstrainedPair> pairs;
  /// Lengths in `data` are divided by this.
  double length_scale = 1.0;
  /// Physical antennas; the last one is eliminated by the centroid constraint.
  int num_antennas = 0;
  int num_position_vars = 0;
  SdpData data;

  std::size_t num_lmi_blocks() const { return 2 * pairs.size(); }
  int t_var(std::size_t pair) const { return num_position_vars + 4 * static_cast<int>(pair) + 3; }
  int T_var(std::size_t pair, int entry) const { return num_position_vars + 4 * static_cast<int>(pair) + entry; }
};

struct PlacementSolution {
  ArrayGeometry geometry;
  double relaxation_bound = 0.0;
  double achieved_cost = 0.0;
  /// (bound - achieved) / bound.
  double gap = 0.0;
  std::vector<double> rank1_residuals;
  int iterations = 0;
  std::string status;
  double max_violation = 0.0;
};

/// Sum over constrained pairs of (p' ds)^2 (m^2).
inline double single_target_objective(const ArrayGeometry& g, double doa, const PlacementConstraints& c) {
  const Vec2 p = look_derivative(doa);
  const auto ant = antennas(g);
  double s = 0.0;
  for (const auto& pr : constrained_pairs(g, c)) {
    const double v = p.dot(ant[pr.tx_ant] - ant[pr.rx_ant]);
    s += v * v;
  }
  return s;
}

namespace sdp_place_detail {

/// Shape-only geometry with M transmitters and N receivers at the origin.
inline ArrayGeometry blank_geometry(int m, int n, ArrayMode mode) {
  if (mode == ArrayMode::kTransceiver) return ArrayGeometry::transceiver(std::vector<Vec2>(static_cast<std::size_t>(m)));
  return ArrayGeometry::separate(std::vector<Vec2>(static_cast<std::size_t>(m)),
                                 std::vector<Vec2>(static_cast<std::size_t>(n)));
}

/// d(ds)/d(position var k) for a pair, with the last antenna = -sum(others).
inline Vec2 pair_direction(const ConstrainedPair& p, int var, int num_antennas) {
  const int ant = var / 2, coord = var % 2;
  auto weight = [&](std::size_t a) {
    if (static_cast<int>(a) == num_antennas - 1) return -1.0;
    return static_cast<int>(a) == ant ? 1.0 : 0.0;
  };
  Vec2 v = Vec2::Zero();
  v[coord] = weight(p.tx_ant) - weight(p.rx_ant);
  return v;
}

}  // namespace sdp_place_detail

/// Builds the relaxation for a target DOA. Only the DOA enters the problem.
inline SdpProblem build_relaxation(const TargetParams& target, int m, int n, ArrayMode mode,
                                   const PlacementConstraints& constraints) {
  if (m < 1 || n < 1) throw InfeasibleBounds("need at least one transmitter and one receiver");
  if (mode == ArrayMode::kTransceiver && m != n) throw InfeasibleBounds("transceiver mode needs M = N");
  SdpProblem pb;
  pb.mode = mode;
  pb.num_tx = m;
  pb.num_rx = n;
  pb.doa_rad = target.doa_rad;
  pb.direction = look_derivative(target.doa_rad);
  pb.projector = pb.direction * pb.direction.transpose();
  const auto shape = sdp_place_detail::blank_geometry(m, n, mode);
  pb.pairs = constrained_pairs(shape, constraints);
  pb.num_antennas = static_cast<int>(num_antennas(shape));
  pb.num_position_vars = 2 * (pb.num_antennas - 1);

  double scale = 0.0;
  for (const auto& p : pb.pairs) {
    if (!(p.d > 0.0 && p.d <= p.e && std::isfinite(p.e)))
      throw InfeasibleBounds("pair (" + std::to_string(p.rx + 1) + "," + std::to_string(p.tx + 1) +
                             ") needs 0 < d <= e");
    scale = std::max(scale, p.e);
  }
  pb.length_scale = scale > 0.0 ? scale : 1.0;
  const double L = pb.length_scale;

  auto& d = pb.data;
  const int nvars = pb.num_position_vars + 4 * static_cast<int>(pb.pairs.size());
  d.a.assign(static_cast<std::size_t>(nvars), {});
  d.b = Eigen::VectorXd::Zero(nvars);

  // F(y) = F0 + sum y_i F_i psd is stored as C = F0, A_i = -F_i.
  auto add_block = [&](int size, const Eigen::MatrixXd& f0) {
    d.block_sizes.push_back(size);
    d.c.push_back(f0);
    return static_cast<int>(d.c.size()) - 1;
  };
  auto put = [&](int var, int block, const Eigen::MatrixXd& f) {
    d.a[static_cast<std::size_t>(var)].push_back({block, -f});
  };
  auto sym3 = [](int i, int j) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(3, 3);
    e(i, j) = 1.0;
    e(j, i) = 1.0;
    return e;
  };
  auto scalar = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };

  const Eigen::Matrix2d& pp = pb.projector;
  for (std::size_t k = 0; k < pb.pairs.size(); ++k) {
    const auto& pr = pb.pairs[k];
    const double dn = pr.d / L, en = pr.e / L;
    const int t11 = pb.T_var(k, 0), t12 = pb.T_var(k, 1), t22 = pb.T_var(k, 2), t = pb.t_var(k);

    Eigen::MatrixXd f0 = Eigen::MatrixXd::Zero(3, 3);
    f0(2, 2) = 1.0;
    const int schur = add_block(3, f0);
    put(t11, schur, sym3(0, 0));
    put(t12, schur, sym3(0, 1));
    put(t22, schur, sym3(1, 1));

    f0 = Eigen::MatrixXd::Identity(3, 3);
    f0(2, 2) = en * en;
    const int ring = add_block(3, f0);

    for (int v = 0; v < pb.num_position_vars; ++v) {
      const Vec2 dir = sdp_place_detail::pair_direction(pr, v, pb.num_antennas);
      if (dir.isZero(0.0)) continue;
      const Eigen::MatrixXd f = dir.x() * sym3(0, 2) + dir.y() * sym3(1, 2);
      put(v, schur, f);
      put(v, ring, f);
    }

    const int upper = add_block(1, scalar(en * en));
    put(t11, upper, scalar(-1.0));
    put(t22, upper, scalar(-1.0));
    if (pr.d < pr.e) {
      const int lower = add_block(1, scalar(-dn * dn));
      put(t11, lower, scalar(1.0));
      put(t22, lower, scalar(1.0));
    }
    const int epi = add_block(1, scalar(0.0));
    put(t11, epi, scalar(pp(0, 0)));
    put(t12, epi, scalar(2.0 * pp(0, 1)));
    put(t22, epi, scalar(pp(1, 1)));
    put(t, epi, scalar(-1.0));
    d.b[t] = 1.0;
  }
  return pb;
}

struct RelaxationSolution {
  SdpResult raw;
  double bound = 0.0;                  // m^2
  std::vector<Eigen::Matrix2d> lifted; // T per pair, m^2
  std::vector<Vec2> antennas;          // relaxed positions, m
};

inline RelaxationSolution solve_sdp(const SdpProblem& pb, double tol = 1e-8, int max_iterations = 200) {
  SdpOptions opt;
  opt.tol = tol;
  opt.max_iterations = max_iterations;
  RelaxationSolution out;
  out.raw = solve_block_sdp(pb.data, opt);
  if (out.raw.status != SdpStatus::kOptimal)
    throw SolverError(to_string(out.raw.status), std::string("SDP solver stopped: ") + to_string(out.raw.status) +
                                                     " after " + std::to_string(out.raw.iterations) +
                                                     " iterations (gap " + std::to_string(out.raw.relative_gap) +
                                                     ", pinf " + std::to_string(out.raw.primal_infeasibility) +
                                                     ", dinf " + std::to_string(out.raw.dual_infeasibility) + ")");
  const double L2 = pb.length_scale * pb.length_scale;
  out.bound = std::max(out.raw.primal_objective, out.raw.dual_objective) * L2;
  if (pb.pairs.empty()) out.bound = 0.0;
  const auto& y = out.raw.y;
  for (std::size_t k = 0; k < pb.pairs.size(); ++k) {
    Eigen::Matrix2d t;
    t << y[pb.T_var(k, 0)], y[pb.T_var(k, 1)], y[pb.T_var(k, 1)], y[pb.T_var(k, 2)];
    out.lifted.push_back(t * L2);
  }
  out.antennas.assign(static_cast<std::size_t>(pb.num_antennas), Vec2::Zero());
  Vec2 sum = Vec2::Zero();
  for (int a = 0; a + 1 < pb.num_antennas; ++a) {
    out.antennas[static_cast<std::size_t>(a)] = pb.length_scale * Vec2(y[2 * a], y[2 * a + 1]);
    sum += out.antennas[static_cast<std::size_t>(a)];
  }
  if (pb.num_antennas > 0) out.antennas.back() = -sum;
  return out;
}

/// Rotation of a whole geometry that carries an optimum at theta to one at theta + shift.
inline ArrayGeometry rotate_solution(const ArrayGeometry& g, double shift) {
  return transform_geometry(g, doa_shift_rotation(shift));
}

struct RecoveryOptions {
  /// Extra polish starts drawn in the frame of p (keeps the pipeline rotation covariant).
  int random_starts = 8;
  std::uint64_t seed = 0;
  LocalOptions local;
};

inline PlacementSolution recover_geometry(const SdpProblem& pb, const RelaxationSolution& rel,
                                          const RecoveryOptions& ro = {}) {
  const auto shape = sdp_place_detail::blank_geometry(pb.num_tx, pb.num_rx, pb.mode);
  const Vec2 p = pb.direction;
  const Vec2 q(-p.y(), p.x());
  const auto K = static_cast<std::size_t>(pb.num_antennas);

  PlacementSolution sol;
  sol.relaxation_bound = rel.bound;
  sol.iterations = rel.raw.iterations;
  sol.status = to_string(rel.raw.status);

  // Rank-one rounding of every lifted block, then least squares for positions.
  std::vector<Vec2> target_ds;
  for (const auto& t : rel.lifted) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(t);
    const double l1 = eig.eigenvalues()[1], l2 = eig.eigenvalues()[0];
    sol.rank1_residuals.push_back(l1 > 0.0 ? std::max(l2, 0.0) / l1 : 1.0);
    Vec2 v = eig.eigenvectors().col(1);
    if (p.dot(v) < 0.0) v = -v;
    target_ds.push_back(std::sqrt(std::max(t.trace(), 0.0)) * v);
  }
  std::vector<Vec2> rounded(K, Vec2::Zero());
  if (K > 1 && !pb.pairs.empty()) {
    const auto nv = static_cast<Eigen::Index>(pb.num_position_vars);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(pb.pairs.size()), nv);
    Eigen::VectorXd rhs(a.rows());
    for (std::size_t k = 0; k < pb.pairs.size(); ++k) {
      for (Eigen::Index v = 0; v < nv; ++v)
        a.block<2, 1>(2 * static_cast<Eigen::Index>(k), v) =
            sdp_place_detail::pair_direction(pb.pairs[k], static_cast<int>(v), pb.num_antennas);
      rhs.segment<2>(2 * static_cast<Eigen::Index>(k)) = target_ds[k];
    }
    const Eigen::VectorXd x = a.completeOrthogonalDecomposition().solve(rhs);
    Vec2 sum = Vec2::Zero();
    for (std::size_t i = 0; i + 1 < K; ++i) {
      rounded[i] = x.segment<2>(2 * static_cast<Eigen::Index>(i));
      sum += rounded[i];
    }
    rounded[K - 1] = -sum;
  }

  // Polish starts: the rounded geometry, an evenly spaced line along p, and
  // seeded random layouts expressed in the (p, q) frame.
  std::vector<std::vector<Vec2>> starts{rounded};
  double e_max = 0.0, d_min = std::numeric_limits<double>::infinity();
  for (const auto& pr : pb.pairs) {
    e_max = std::max(e_max, pr.e);
    d_min = std::min(d_min, pr.d);
  }
  if (!pb.pairs.empty() && K > 1) {
    std::vector<Vec2> line(K);
    const double step = std::max(e_max / static_cast<double>(K - 1), d_min);
    for (std::size_t i = 0; i < K; ++i) line[i] = (static_cast<double>(i) - 0.5 * static_cast<double>(K - 1)) * step * p;
    starts.push_back(line);
    std::seed_seq seq{static_cast<std::uint32_t>(ro.seed), static_cast<std::uint32_t>(ro.seed >> 32), 0x5dbu};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(-0.5 * e_max, 0.5 * e_max);
    for (int r = 0; r < ro.random_starts; ++r) {
      std::vector<Vec2> s(K);
      for (auto& a : s) a = u(rng) * p + u(rng) * q;
      starts.push_back(s);
    }
  }

  auto cost = [&](const std::vector<Vec2>& ant) {
    double s = 0.0;
    for (const auto& pr : pb.pairs) {
      const double v = p.dot(ant[pr.tx_ant] - ant[pr.rx_ant]);
      s += v * v;
    }
    return -s;
  };
  const double scale = e_max > 0.0 ? e_max : 1.0;
  LocalResult best;
  bool have = false;
  double worst_violation = 0.0;
  for (const auto& s : starts) {
    auto r = local_minimize(s, pb.pairs, cost, scale, ro.local);
    worst_violation = std::max(worst_violation, r.max_violation);
    if (!r.feasible) continue;
    if (!have || r.cost < best.cost) {
      best = std::move(r);
      have = true;
    }
  }
  if (!have) throw RecoveryInfeasible(worst_violation);

  sol.geometry = with_antennas(shape, best.antennas);
  sol.geometry.centered = true;
  sol.achieved_cost = -best.cost;
  sol.max_violation = best.max_violation;
  sol.gap = sol.relaxation_bound > 0.0 ? (sol.relaxation_bound - sol.achieved_cost) / sol.relaxation_bound : 0.0;
  return sol;
}

/// Full single-target pipeline for a scenario with exactly one target.
inline PlacementSolution place_single_target(const Scenario& s, double tol = 1e-8, const RecoveryOptions& ro = {}) {
  if (s.targets.size() != 1)
    throw InvalidScenario("single-target placement needs exactly one target, got " + std::to_string(s.targets.size()));
  const auto pb = build_relaxation(s.targets[0], static_cast<int>(s.array.num_tx()), static_cast<int>(s.array.num_rx()),
                                   s.array.mode, s.constraints);
  const auto rel = solve_sdp(pb, tol);
  return recover_geometry(pb, rel, ro);
}

}  // namespace mimoplace
