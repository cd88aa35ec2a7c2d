#pragma once

// Multi-target placement: minimise a scalar of the Cartesian CRLB over
// ring-constrained, centred geometries, with Gaussian restarts around the
// incumbent (accept when the new cost is no worse, stop on budget or patience).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mimoplace/errors.hpp"
#include "mimoplace/fim_crlb.hpp"
#include "mimoplace/local_optimizer.hpp"
#include "mimoplace/scenario.hpp"
#include "mimoplace/single_target_sdp.hpp"

namespace mimoplace {

enum class CostMetric { kTrace, kDet, kMaxEig, kPositionTrace };

inline const char* to_string(CostMetric m) {
  switch (m) {
    case CostMetric::kTrace: return "trace";
    case CostMetric::kDet: return "det";
    case CostMetric::kMaxEig: return "maxeig";
    case CostMetric::kPositionTrace: return "position_trace";
  }
  return "unknown";
}

inline double metric_value(const FimReport& r, CostMetric m) {
  switch (m) {
    case CostMetric::kTrace: return r.metrics.trace;
    case CostMetric::kDet: return r.metrics.det;
    case CostMetric::kMaxEig: return r.metrics.max_eig;
    case CostMetric::kPositionTrace: return r.position_trace;
  }
  return r.metrics.trace;
}

/// Trace of the Cartesian CRLB (or another metric of it). Throws SingularFim.
inline double placement_cost(const Scenario& s, CostMetric metric = CostMetric::kTrace, const FimOptions& opt = {}) {
  return metric_value(state_fim_and_crlb(s, opt), metric);
}

/// Cost for optimisation: singular geometries fall back to the ridged bound so
/// line searches see a large finite value instead of an exception.
inline double guarded_cost(const Scenario& s, CostMetric metric) {
  try {
    return placement_cost(s, metric);
  } catch (const SingularFim&) {
    FimOptions ridge;
    ridge.ridge = true;
    ridge.max_condition = std::numeric_limits<double>::infinity();
    try {
      return placement_cost(s, metric, ridge);
    } catch (const SingularFim&) {
      return std::numeric_limits<double>::infinity();
    }
  }
}

/// Cost of a finished geometry: +inf when the bound does not exist.
inline double final_cost(const Scenario& s, CostMetric metric) {
  try {
    return placement_cost(s, metric);
  } catch (const SingularFim&) {
    return std::numeric_limits<double>::infinity();
  }
}

struct PlacementResult {
  ArrayGeometry geometry;
  double cost = std::numeric_limits<double>::infinity();
  double max_violation = 0.0;
  bool feasible = false;
  bool line_search_failed = false;
  int iterations = 0;
  int evaluations = 0;
};

inline PlacementResult local_optimize(const Scenario& s, const ArrayGeometry& init, CostMetric metric = CostMetric::kTrace,
                                      const LocalOptions& opt = {}) {
  const auto pairs = constrained_pairs(s.array, s.constraints);
  Scenario work = s;
  auto cost = [&](const std::vector<Vec2>& ant) {
    work.array = with_antennas(s.array, ant);
    return guarded_cost(work, metric);
  };
  const auto r = local_minimize(antennas(init), pairs, cost, s.radar.wavelength_m, opt);
  PlacementResult out;
  out.geometry = with_antennas(s.array, r.antennas);
  out.geometry.centered = true;
  work.array = out.geometry;
  out.cost = final_cost(work, metric);
  out.max_violation = r.max_violation;
  out.feasible = r.feasible;
  out.line_search_failed = r.line_search_failed;
  out.iterations = r.iterations;
  out.evaluations = r.evaluations;
  return out;
}

// ---------------------------------------------------------------------------
// Random feasible geometries

/// Uniform positions in the disk of radius e, re-centred, kept when every
/// ring holds. After `max_draws` rejections the last draw is repaired instead.
template <class Rng>
std::vector<Vec2> random_feasible_antennas(const ArrayGeometry& shape, const PlacementConstraints& c, Rng& rng,
                                           int max_draws = 20000) {
  const auto pairs = constrained_pairs(shape, c);
  const auto k = num_antennas(shape);
  double e = 0.0;
  for (const auto& p : pairs) e = std::max(e, p.e);
  if (pairs.empty()) e = c.e_m;
  const double radius = e;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec2> ant(k);
  for (int draw = 0; draw < max_draws; ++draw) {
    for (auto& a : ant) {
      const double r = radius * std::sqrt(u(rng)), phi = 2.0 * kPi * u(rng);
      a = {r * std::cos(phi), r * std::sin(phi)};
    }
    ant = recentre(ant);
    if (local_detail::ring_violation(ant, pairs) <= 0.0) return ant;
  }
  return repair_feasibility(ant, pairs, e, 1e-11 * e);
}

template <class Rng>
ArrayGeometry random_feasible_geometry(const ArrayGeometry& shape, const PlacementConstraints& c, Rng& rng) {
  auto g = with_antennas(shape, random_feasible_antennas(shape, c, rng));
  g.centered = true;
  return g;
}

// ---------------------------------------------------------------------------
// Sampling multistart

struct SamplerConfig {
  int restart_budget = 50;  // U
  int patience = 10;        // mu
  /// Per-antenna restart covariance (m^2). Zero means (lambda / 2)^2 I.
  Eigen::Matrix2d restart_cov = Eigen::Matrix2d::Zero();
  std::uint64_t seed = 0;
  CostMetric metric = CostMetric::kTrace;
  LocalOptions local;
};

struct RestartRecord {
  int restart = 0;
  ArrayGeometry init;
  ArrayGeometry result;
  double cost = 0.0;
  int inner_iterations = 0;
  bool accepted = false;
  bool feasible = false;
};

struct OptimizerTrace {
  std::vector<RestartRecord> records;
  /// Incumbent cost after each record.
  std::vector<double> best_so_far;
};

struct MultiPlacementSolution {
  ArrayGeometry geometry;
  double cost = std::numeric_limits<double>::infinity();
  int restarts = 0;
  int accepted = 0;
  double max_violation = 0.0;
  std::string status;
};

inline std::mt19937_64 restart_rng(std::uint64_t seed, std::uint64_t restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart), static_cast<std::uint32_t>(restart >> 32), 0xa1u};
  return std::mt19937_64(seq);
}

/// Restart loop. `init` seeds the first local solve; pass nullptr to draw a
/// random feasible start from the configured seed.
inline MultiPlacementSolution sample_restart_optimize(const Scenario& s, const SamplerConfig& cfg, OptimizerTrace* trace = nullptr,
                                                      const ArrayGeometry* init = nullptr) {
  if (cfg.restart_budget < 1 || cfg.patience < 1) throw InvalidScenario("restart budget and patience must be >= 1");
  Eigen::Matrix2d q = cfg.restart_cov;
  if (q.isZero(0.0)) q = Eigen::Matrix2d::Identity() * std::pow(0.5 * s.radar.wavelength_m, 2);
  Eigen::LLT<Eigen::Matrix2d> qf(q);
  if (qf.info() != Eigen::Success) throw InvalidScenario("restart covariance must be positive definite");
  const Eigen::Matrix2d root = qf.matrixL();

  OptimizerTrace local_trace;
  OptimizerTrace& tr = trace ? *trace : local_trace;
  tr = {};

  auto rng0 = restart_rng(cfg.seed, 0);
  const ArrayGeometry start = init ? *init : random_feasible_geometry(s.array, s.constraints, rng0);
  auto first = local_optimize(s, start, cfg.metric, cfg.local);
  bool any_ok = first.feasible && std::isfinite(first.cost);

  MultiPlacementSolution best;
  best.geometry = first.geometry;
  best.cost = any_ok ? first.cost : std::numeric_limits<double>::infinity();
  best.max_violation = first.max_violation;
  tr.records.push_back({0, start, first.geometry, first.cost, first.iterations, any_ok, first.feasible});
  tr.best_so_far.push_back(best.cost);

  int stale = 0;
  int u = 1;
  for (; u <= cfg.restart_budget && stale < cfg.patience; ++u) {
    auto rng = restart_rng(cfg.seed, static_cast<std::uint64_t>(u));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto ant = antennas(best.geometry);
    for (auto& a : ant) a += root * Vec2(normal(rng), normal(rng));
    const ArrayGeometry probe = with_antennas(s.array, recentre(ant));
    auto r = local_optimize(s, probe, cfg.metric, cfg.local);
    const bool ok = r.feasible && std::isfinite(r.cost);
    any_ok = any_ok || ok;
    const bool accept = ok && (!std::isfinite(best.cost) || r.cost / best.cost <= 1.0);
    if (accept) {
      best.geometry = r.geometry;
      best.cost = r.cost;
      best.max_violation = r.max_violation;
      ++best.accepted;
      stale = 0;
    } else {
      ++stale;
    }
    tr.records.push_back({u, probe, r.geometry, r.cost, r.iterations, accept, r.feasible});
    tr.best_so_far.push_back(best.cost);
  }
  if (!any_ok) throw AllRestartsFailed("no local solve reached a feasible geometry with an invertible FIM");
  best.restarts = u - 1;
  best.status = stale >= cfg.patience ? "patience" : "budget";
  return best;
}

/// Interval containing |omega_1(l) - omega_2(l)| for pair separations in [d, e].
inline std::pair<double, double> omega_separation_interval(double dtheta, double d, double e, double wavelength) {
  const double f = (2.0 * kPi / wavelength) * std::sqrt(std::max(0.0, 2.0 * (1.0 - std::cos(dtheta))));
  return {f * d, f * e};
}

}  // namespace mimoplace
