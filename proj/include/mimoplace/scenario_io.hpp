#pragma once

// Scenario documents (JSON). Omitted radar fields take the default radar values,
// omitted constraints default to d = lambda, e = 2 lambda. Unknown keys are
// rejected so typos never pass silently.

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimoplace/errors.hpp"
#include "mimoplace/scenario.hpp"

namespace mimoplace {

using Json = nlohmann::json;

namespace io_detail {

inline int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline void reject_unknown(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw SchemaError(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }
}

inline double number(const Json& obj, const std::string& path, const char* key) {
  const std::string field = path + "." + key;
  if (!obj.contains(key)) throw SchemaError(field, "required field is missing");
  const Json& v = obj.at(key);
  if (!v.is_number()) throw ParseError(field, "expected a number, got " + v.dump());
  return v.get<double>();
}

inline double number_or(const Json& obj, const std::string& path, const char* key, double fallback) {
  return obj.contains(key) ? number(obj, path, key) : fallback;
}

inline int integer(const Json& obj, const std::string& path, const char* key) {
  const std::string field = path + "." + key;
  if (!obj.contains(key)) throw SchemaError(field, "required field is missing");
  const Json& v = obj.at(key);
  if (!v.is_number_integer()) throw ParseError(field, "expected an integer, got " + v.dump());
  return v.get<int>();
}

inline bool boolean_or(const Json& obj, const std::string& path, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_boolean()) throw ParseError(path + "." + key, "expected true or false, got " + v.dump());
  return v.get<bool>();
}

inline std::vector<Vec2> points(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path, "expected an array of [x, y] pairs");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Json& p = v[i];
    const std::string f = path + "[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ParseError(f, "expected [x, y], got " + p.dump());
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

inline Json points_json(const std::vector<Vec2>& pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back({p.x(), p.y()});
  return a;
}

}  // namespace io_detail

inline RadarConfig radar_from_json(const Json& j) {
  using namespace io_detail;
  reject_unknown(j, "radar",
                 {"lambda_m", "r_bin_m", "snapshots", "sigma2_alpha", "sigma2_w", "powers_w", "max_range_m", "include_bin0"});
  RadarConfig r;
  r.wavelength_m = number_or(j, "radar", "lambda_m", r.wavelength_m);
  r.bin_width_m = number_or(j, "radar", "r_bin_m", r.bin_width_m);
  if (j.contains("snapshots")) r.snapshots = integer(j, "radar", "snapshots");
  r.scatter_var = number_or(j, "radar", "sigma2_alpha", r.scatter_var);
  r.noise_var = number_or(j, "radar", "sigma2_w", r.noise_var);
  r.max_range_m = number_or(j, "radar", "max_range_m", r.max_range_m);
  r.include_bin0 = boolean_or(j, "radar", "include_bin0", r.include_bin0);
  if (j.contains("powers_w")) {
    const Json& p = j.at("powers_w");
    if (!p.is_array()) throw ParseError("radar.powers_w", "expected an array of numbers");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!p[i].is_number()) throw ParseError("radar.powers_w[" + std::to_string(i) + "]", "expected a number");
      r.powers_w.push_back(p[i].get<double>());
    }
  }
  return r;
}

inline ArrayGeometry array_from_json(const Json& j) {
  using namespace io_detail;
  reject_unknown(j, "array", {"mode", "tx", "rx", "centered"});
  if (!j.contains("mode")) throw SchemaError("array.mode", "required field is missing");
  if (!j.at("mode").is_string()) throw ParseError("array.mode", "expected \"transceiver\" or \"separate\"");
  const auto mode = j.at("mode").get<std::string>();
  if (!j.contains("tx")) throw SchemaError("array.tx", "required field is missing");
  const auto tx = points(j.at("tx"), "array.tx");
  ArrayGeometry g;
  if (mode == "transceiver") {
    g = ArrayGeometry::transceiver(tx);
    // An explicit rx list is kept as given; validation reports a mismatch.
    if (j.contains("rx")) g.rx = points(j.at("rx"), "array.rx");
  } else if (mode == "separate") {
    if (!j.contains("rx")) throw SchemaError("array.rx", "required in separate mode");
    g = ArrayGeometry::separate(tx, points(j.at("rx"), "array.rx"));
  } else {
    throw ParseError("array.mode", "expected \"transceiver\" or \"separate\", got \"" + mode + "\"");
  }
  g.centered = boolean_or(j, "array", "centered", false);
  return g;
}

inline PlacementConstraints constraints_from_json(const Json& j) {
  using namespace io_detail;
  reject_unknown(j, "constraints", {"d_m", "e_m", "pairs", "binding"});
  PlacementConstraints c;
  c.d_m = number(j, "constraints", "d_m");
  c.e_m = number(j, "constraints", "e_m");
  c.binding = boolean_or(j, "constraints", "binding", false);
  if (j.contains("pairs")) {
    const Json& ps = j.at("pairs");
    if (!ps.is_array()) throw ParseError("constraints.pairs", "expected an array");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::string path = "constraints.pairs[" + std::to_string(i) + "]";
      reject_unknown(ps[i], path, {"n", "m", "d_m", "e_m"});
      // Receiver n and transmitter m are 1-based in documents.
      PairBound b;
      b.rx = integer(ps[i], path, "n") - 1;
      b.tx = integer(ps[i], path, "m") - 1;
      b.d_m = number(ps[i], path, "d_m");
      b.e_m = number(ps[i], path, "e_m");
      if (b.rx < 0 || b.tx < 0) throw ParseError(path, "indices are 1-based");
      c.overrides.push_back(b);
    }
  }
  return c;
}

inline TargetParams target_from_json(const Json& j, std::size_t i, const RadarConfig& radar) {
  using namespace io_detail;
  const std::string path = "targets[" + std::to_string(i) + "]";
  if (!j.is_object()) throw ParseError(path, "expected an object");
  const double xi = number(j, path, "xi"), zeta = number(j, path, "zeta");
  if (j.contains("x_m") || j.contains("y_m")) {
    reject_unknown(j, path, {"x_m", "y_m", "xi", "zeta"});
    const Vec2 xy(number(j, path, "x_m"), number(j, path, "y_m"));
    return target_at(xy, xi, zeta, radar);
  }
  reject_unknown(j, path, {"cell", "theta_rad", "beta", "xi", "zeta"});
  return {integer(j, path, "cell"), number(j, path, "theta_rad"), number(j, path, "beta"), xi, zeta};
}

inline Scenario scenario_from_json(const Json& j) {
  io_detail::reject_unknown(j, "", {"radar", "array", "constraints", "targets"});
  Scenario s;
  if (j.contains("radar")) s.radar = radar_from_json(j.at("radar"));
  if (!j.contains("array")) throw SchemaError("array", "required field is missing");
  s.array = array_from_json(j.at("array"));
  if (j.contains("constraints")) {
    s.constraints = constraints_from_json(j.at("constraints"));
  } else {
    s.constraints = PlacementConstraints::uniform(s.radar.wavelength_m, 2.0 * s.radar.wavelength_m);
  }
  if (!j.contains("targets")) throw SchemaError("targets", "required field is missing");
  const Json& ts = j.at("targets");
  if (!ts.is_array()) throw ParseError("targets", "expected an array");
  for (std::size_t i = 0; i < ts.size(); ++i) s.targets.push_back(target_from_json(ts[i], i, s.radar));
  sort_targets(s);
  return s;
}

/// Parses a scenario document. Syntax errors carry the line number.
inline Scenario load_scenario(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("", e.what(), io_detail::line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  return scenario_from_json(j);
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("", "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str());
}

inline Json to_json(const ArrayGeometry& g) {
  Json a;
  a["mode"] = to_string(g.mode);
  a["tx"] = io_detail::points_json(g.tx);
  if (g.mode == ArrayMode::kSeparate) a["rx"] = io_detail::points_json(g.rx);
  a["centered"] = g.centered;
  return a;
}

inline Json to_json(const RadarConfig& r) {
  Json j{{"lambda_m", r.wavelength_m}, {"r_bin_m", r.bin_width_m},       {"snapshots", r.snapshots},
         {"sigma2_alpha", r.scatter_var}, {"sigma2_w", r.noise_var}, {"max_range_m", r.max_range_m},
         {"include_bin0", r.include_bin0}};
  if (!r.powers_w.empty()) j["powers_w"] = r.powers_w;
  return j;
}

inline Json to_json(const PlacementConstraints& c) {
  Json j{{"d_m", c.d_m}, {"e_m", c.e_m}, {"binding", c.binding}};
  if (!c.overrides.empty()) {
    j["pairs"] = Json::array();
    for (const auto& o : c.overrides) j["pairs"].push_back({{"n", o.rx + 1}, {"m", o.tx + 1}, {"d_m", o.d_m}, {"e_m", o.e_m}});
  }
  return j;
}

/// Scenario document; targets are written in (cell, theta, beta) form so a
/// reload reproduces them exactly.
inline Json to_json(const Scenario& s) {
  Json j;
  j["radar"] = to_json(s.radar);
  j["array"] = to_json(s.array);
  j["constraints"] = to_json(s.constraints);
  j["targets"] = Json::array();
  for (const auto& t : s.targets)
    j["targets"].push_back({{"cell", t.cell}, {"theta_rad", t.doa_rad}, {"beta", t.ratio}, {"xi", t.amp_re}, {"zeta", t.amp_im}});
  return j;
}

inline std::string save_scenario(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

}  // namespace mimoplace
