#pragma once

// CSV and JSON emitters for the command-line front end. CSV follows RFC 4180
// (CRLF line ends, fields quoted only when needed). Column sets are fixed:
//
//   FIM/CRLB dump   row,col,value
//   restart trace   restart,inner_iter,cost,accepted
//   RMSE table      snr_db,geometry,target,rmse_m,crlb_m,trials,failures,rmse_se_m
//   sweep table     axis_value,geometry,trace,det,max_eig,doa_var
//   bound table     dtheta_rad,lower_rad,upper_rad

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimoplace/errors.hpp"
#include "mimoplace/fim_crlb.hpp"
#include "mimoplace/mc_sim.hpp"
#include "mimoplace/multi_target.hpp"
#include "mimoplace/scenario_io.hpp"
#include "mimoplace/single_target_sdp.hpp"

namespace mimoplace {

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out), columns_(header.size()) {
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw DimensionMismatch("CSV row has the wrong number of fields");
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << csv_field(fields[i]);
    out_ << "\r\n";
  }

 private:
  std::ostream& out_;
  std::size_t columns_;
};

inline void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  CsvWriter w(out, {"row", "col", "value"});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.row({std::to_string(i), std::to_string(j), format_double(m(i, j))});
}

/// JSON cannot carry inf/nan; those become null.
inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json metrics_json(const FimReport& r) {
  Json j{{"trace", json_number(r.metrics.trace)},
         {"det", json_number(r.metrics.det)},
         {"max_eig", json_number(r.metrics.max_eig)},
         {"cond", json_number(r.metrics.cond)},
         {"position_trace", json_number(r.position_trace)}};
  j["position_rmse_bound_m"] = Json::array();
  for (const auto& b : r.position_blocks) j["position_rmse_bound_m"].push_back(json_number(std::sqrt(b.trace())));
  return j;
}

inline Json placement_json(const PlacementSolution& p) {
  Json res = Json::array();
  for (double v : p.rank1_residuals) res.push_back(json_number(v));
  return {{"geometry", to_json(p.geometry)},
          {"bound", json_number(p.relaxation_bound)},
          {"achieved", json_number(p.achieved_cost)},
          {"gap", json_number(p.gap)},
          {"rank1_residuals", res},
          {"iterations", p.iterations},
          {"status", p.status},
          {"max_violation", json_number(p.max_violation)}};
}

inline Json placement_json(const MultiPlacementSolution& p, CostMetric metric) {
  return {{"geometry", to_json(p.geometry)},
          {"cost", json_number(p.cost)},
          {"metric", to_string(metric)},
          {"restarts", p.restarts},
          {"accepted", p.accepted},
          {"status", p.status},
          {"max_violation", json_number(p.max_violation)}};
}

inline void write_trace_csv(std::ostream& out, const OptimizerTrace& t) {
  CsvWriter w(out, {"restart", "inner_iter", "cost", "accepted"});
  for (const auto& r : t.records)
    w.row({std::to_string(r.restart), std::to_string(r.inner_iterations), format_double(r.cost),
           r.accepted ? "1" : "0"});
}

inline std::vector<std::string> rmse_header() {
  return {"snr_db", "geometry", "target", "rmse_m", "crlb_m", "trials", "failures", "rmse_se_m"};
}

inline void write_rmse_rows(CsvWriter& w, const std::string& geometry, const std::vector<EstimationResult>& rs) {
  for (const auto& r : rs)
    for (std::size_t t = 0; t < r.rmse_m.size(); ++t)
      w.row({format_double(r.snr_db), geometry, std::to_string(t + 1), format_double(r.rmse_m[t]),
             format_double(r.crlb_m[t]), std::to_string(r.trials), std::to_string(r.failures),
             format_double(r.rmse_se_m[t])});
}

inline std::vector<std::string> sweep_header() {
  return {"axis_value", "geometry", "trace", "det", "max_eig", "doa_var"};
}

inline void write_sweep_row(CsvWriter& w, const SweepRow& r) {
  w.row({format_double(r.axis_value), r.geometry, format_double(r.trace), format_double(r.det),
         format_double(r.max_eig), format_double(r.doa_var)});
}

inline void write_bound_csv(std::ostream& out, const std::vector<double>& dthetas, double d, double e,
                            double wavelength) {
  CsvWriter w(out, {"dtheta_rad", "lower_rad", "upper_rad"});
  for (double dt : dthetas) {
    const auto [lo, hi] = omega_separation_interval(dt, d, e, wavelength);
    w.row({format_double(dt), format_double(lo), format_double(hi)});
  }
}

}  // namespace mimoplace
