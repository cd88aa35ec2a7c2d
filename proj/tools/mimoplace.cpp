// mimoplace: command-line front end.
//
// Exit codes: 0 ok, 1 input error, 2 singular or degenerate model, 3 solver failure.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mimoplace/mimoplace.hpp"

namespace fs = std::filesystem;
using namespace mimoplace;

namespace {

constexpr const char* kVersion = "1.0.0";

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

struct Options {
  std::string scenario;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::string metric = "trace";
  std::string axis;
  std::string range;
  std::string snr = "0:30:7";
  int trials = 100;
  int restarts = 50;
  int patience = 10;
  double sampler_std = 0.0;
  std::string geometries = "ula,optimal,random";
  int threads = 1;
  std::optional<bool> include_bin0;
  std::string dtheta = "0:3.141592653589793:50";
  bool unbanded = false;
};

/// Error raised for bad flag values; maps to exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<double> parse_range(const std::string& spec, const std::string& flag) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3) throw UsageError(flag + " expects a:b:n, got '" + spec + "'");
  double a, b;
  long n;
  try {
    std::size_t used = 0;
    a = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("a");
    b = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("b");
    n = std::stol(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("n");
  } catch (const std::exception&) {
    throw UsageError(flag + " expects numbers a:b:n, got '" + spec + "'");
  }
  if (n < 1) throw UsageError(flag + " needs n >= 1");
  std::vector<double> out;
  for (long i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  return out;
}

CostMetric parse_metric(const std::string& m) {
  if (m == "trace") return CostMetric::kTrace;
  if (m == "det") return CostMetric::kDet;
  if (m == "maxeig") return CostMetric::kMaxEig;
  if (m == "position_trace") return CostMetric::kPositionTrace;
  throw UsageError("--metric must be trace, det, maxeig or position_trace");
}

SweepAxis parse_axis(const std::string& a) {
  if (a == "spacing") return SweepAxis::kSpacing;
  if (a == "dtheta") return SweepAxis::kDeltaTheta;
  if (a == "antenna_count") return SweepAxis::kAntennaCount;
  if (a == "target_count") return SweepAxis::kTargetCount;
  throw UsageError("--axis must be spacing, dtheta, antenna_count or target_count");
}

struct GeometryChoice {
  std::vector<std::string> names;
  std::optional<ArrayGeometry> user;
  std::string user_path;
};

GeometryChoice parse_geometries(const std::string& list) {
  GeometryChoice g;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item == "ula" || item == "optimal" || item == "random") {
      g.names.push_back(item);
    } else if (item.rfind("file:", 0) == 0) {
      g.user_path = item.substr(5);
      g.user = load_scenario_file(g.user_path).array;
      g.names.push_back("file");
    } else {
      throw UsageError("unknown geometry '" + item + "' (use ula, optimal, random, file:<path>)");
    }
  }
  if (g.names.empty()) throw UsageError("--geometries is empty");
  return g;
}

SamplerConfig sampler_config(const Options& o) {
  SamplerConfig c;
  c.restart_budget = o.restarts;
  c.patience = o.patience;
  c.seed = o.seed;
  c.metric = parse_metric(o.metric);
  if (o.sampler_std > 0.0) c.restart_cov = Eigen::Matrix2d::Identity() * o.sampler_std * o.sampler_std;
  return c;
}

class Run {
 public:
  Run(std::string sub, const Options& o) : sub_(std::move(sub)), opt_(o), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(o.out);
    outputs_.push_back((fs::path(o.out) / "manifest.json").string());
  }

  Scenario load() {
    Scenario s = load_scenario_file(opt_.scenario);
    if (opt_.include_bin0) s.radar.include_bin0 = *opt_.include_bin0;
    const auto issues = validate_scenario(s);
    if (!issues.empty()) {
      std::string msg = "scenario is invalid:";
      for (const auto& v : issues) msg += std::string("\n  ") + to_string(v.kind) + ": " + v.detail;
      throw InvalidScenario(msg);
    }
    scenario_ = to_json(s);
    return s;
  }

  std::string path(const std::string& name) {
    const auto p = (fs::path(opt_.out) / name).string();
    outputs_.push_back(p);
    return p;
  }

  void set(const std::string& key, Json v) { config_[key] = std::move(v); }

  /// Written before long work starts and again when it ends.
  void manifest(const std::string& status) {
    Json m;
    m["subcommand"] = sub_;
    m["scenario_path"] = opt_.scenario;
    m["scenario"] = scenario_;
    m["config"] = config_;
    m["seed"] = opt_.seed;
    m["threads"] = opt_.threads;
    m["tool_version"] = kVersion;
    m["outputs"] = outputs_;
    m["status"] = status;
    m["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream f((fs::path(opt_.out) / "manifest.json").string());
    f << m.dump(2) << "\n";
  }

 private:
  std::string sub_;
  Options opt_;
  std::chrono::steady_clock::time_point start_;
  Json scenario_;
  Json config_ = Json::object();
  std::vector<std::string> outputs_{};
};

std::ofstream open_out(const std::string& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + p + "'");
  return f;
}

int run_crlb(const Options& o) {
  Run run("crlb", o);
  const Scenario s = run.load();
  FimOptions fo;
  fo.banded = !o.unbanded;
  run.set("banded", fo.banded);
  const auto fim_p = run.path("fim.csv"), state_p = run.path("state_fim.csv"), crlb_p = run.path("crlb.csv"),
             metrics_p = run.path("metrics.json");
  run.manifest("running");
  const auto rep = state_fim_and_crlb(s, fo);
  {
    auto f = open_out(fim_p);
    write_matrix_csv(f, rep.parameter_fim);
  }
  {
    auto f = open_out(state_p);
    write_matrix_csv(f, rep.state_fim);
  }
  {
    auto f = open_out(crlb_p);
    write_matrix_csv(f, rep.crlb);
  }
  {
    auto f = open_out(metrics_p);
    f << metrics_json(rep).dump(2) << "\n";
  }
  run.manifest("complete");
  std::cout << "trace " << format_double(rep.metrics.trace) << "\n";
  return 0;
}

int run_place(const Options& o, const std::string& kind) {
  Run run("place " + kind, o);
  Scenario s = run.load();
  const auto geom_p = run.path("geometry.json"), scen_p = run.path("scenario.json"), trace_p = run.path("trace.csv");
  if (kind == "single") {
    if (s.targets.size() != 1)
      throw UsageError("'place single' needs exactly one target (scenario has " + std::to_string(s.targets.size()) +
                       "); use 'place multi' instead");
    RecoveryOptions ro;
    ro.seed = o.seed;
    run.manifest("running");
    const auto sol = place_single_target(s, 1e-8, ro);
    s.array = sol.geometry;
    {
      auto f = open_out(geom_p);
      f << placement_json(sol).dump(2) << "\n";
    }
    {
      auto f = open_out(trace_p);
      CsvWriter w(f, {"restart", "inner_iter", "cost", "accepted"});
      w.row({"0", std::to_string(sol.iterations), format_double(sol.achieved_cost), "1"});
    }
    std::cout << "bound " << format_double(sol.relaxation_bound) << " achieved " << format_double(sol.achieved_cost)
              << " gap " << format_double(sol.gap) << "\n";
  } else {
    const auto cfg = sampler_config(o);
    run.set("restarts", cfg.restart_budget);
    run.set("patience", cfg.patience);
    run.set("metric", to_string(cfg.metric));
    run.set("sampler_std_m", o.sampler_std > 0.0 ? o.sampler_std : 0.5 * s.radar.wavelength_m);
    run.manifest("running");
    OptimizerTrace tr;
    const auto sol = sample_restart_optimize(s, cfg, &tr);
    s.array = sol.geometry;
    {
      auto f = open_out(geom_p);
      f << placement_json(sol, cfg.metric).dump(2) << "\n";
    }
    {
      auto f = open_out(trace_p);
      write_trace_csv(f, tr);
    }
    std::cout << "cost " << format_double(sol.cost) << " after " << sol.restarts << " restarts\n";
  }
  {
    auto f = open_out(scen_p);
    f << save_scenario(s);
  }
  run.manifest("complete");
  return 0;
}

int run_sweep(const Options& o) {
  Run run("sweep", o);
  const Scenario s = run.load();
  if (o.axis.empty()) throw UsageError("sweep needs --axis");
  if (o.range.empty()) throw UsageError("sweep needs --range a:b:n");
  const auto axis = parse_axis(o.axis);
  const auto values = parse_range(o.range, "--range");
  const auto geo = parse_geometries(o.geometries);
  SweepOptions so;
  so.geometries = geo.names;
  so.user_geometry = geo.user;
  so.sampler = sampler_config(o);
  so.seed = o.seed;
  so.interrupted = [] { return g_interrupted.load(); };
  run.set("axis", to_string(axis));
  run.set("values", values);
  run.set("geometries", geo.names);
  if (geo.user) run.set("geometry_file", geo.user_path);
  const auto out_p = run.path("sweep.csv");
  run.manifest("running");
  const auto rows = crlb_sweep(s, axis, values, so);
  auto f = open_out(out_p);
  CsvWriter w(f, sweep_header());
  for (const auto& r : rows) write_sweep_row(w, r);
  f.flush();
  run.manifest(g_interrupted ? "truncated" : "complete");
  std::cout << rows.size() << " rows\n";
  return 0;
}

int run_simulate(const Options& o) {
  Run run("simulate", o);
  const Scenario s = run.load();
  const auto geo = parse_geometries(o.geometries);
  McConfig mc;
  mc.snr_db = parse_range(o.snr, "--snr");
  mc.trials = o.trials;
  mc.seed = o.seed;
  mc.interrupted = [] { return g_interrupted.load(); };
  run.set("snr_db", mc.snr_db);
  run.set("trials", mc.trials);
  run.set("geometries", geo.names);
  run.set("estimator", "concentrated ML, 0.2 deg x 0.01 grid, front sector");
  const auto out_p = run.path("rmse.csv");
  run.manifest("running");
  auto f = open_out(out_p);
  CsvWriter w(f, rmse_header());
  const auto cfg = sampler_config(o);
  for (std::size_t i = 0; i < geo.names.size() && !g_interrupted; ++i) {
    const auto& name = geo.names[i];
    Scenario g = s;
    if (name == "ula") {
      g.array = half_wavelength_ula(s.array, s.radar);
    } else if (name == "optimal") {
      g.array = optimal_geometry(s, cfg);
    } else if (name == "random") {
      auto rng = restart_rng(o.seed, 0);
      g.array = random_feasible_geometry(s.array, s.constraints, rng);
    } else {
      g.array = *geo.user;
    }
    write_rmse_rows(w, name, rmse_experiment(g, mc));
    f.flush();
  }
  run.manifest(g_interrupted ? "truncated" : "complete");
  return 0;
}

int run_bound(const Options& o) {
  Run run("bound", o);
  double d = 0.3, e = 0.6, lambda = 0.3;
  if (!o.scenario.empty()) {
    const Scenario s = run.load();
    d = s.constraints.d_m;
    e = s.constraints.e_m;
    lambda = s.radar.wavelength_m;
  }
  const auto values = parse_range(o.dtheta, "--dtheta");
  run.set("d_m", d);
  run.set("e_m", e);
  run.set("lambda_m", lambda);
  const auto out_p = run.path("bound.csv");
  run.manifest("running");
  auto f = open_out(out_p);
  write_bound_csv(f, values, d, e, lambda);
  run.manifest("complete");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Antenna placement for collocated MIMO radar"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options o;

  auto common = [&](CLI::App* sub, bool need_scenario) {
    auto* opt = sub->add_option("--scenario", o.scenario, "scenario JSON file");
    if (need_scenario) opt->required();
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "random seed")->capture_default_str();
    sub->add_option("--threads", o.threads, "worker cap")->capture_default_str();
    sub->add_option("--include-bin0", o.include_bin0, "keep the spill-only bin 0 (true/false)");
  };
  auto sampler = [&](CLI::App* sub) {
    sub->add_option("--metric", o.metric, "trace|det|maxeig|position_trace")->capture_default_str();
    sub->add_option("--restarts", o.restarts, "restart budget")->capture_default_str();
    sub->add_option("--patience", o.patience, "stop after this many rejected restarts")->capture_default_str();
    sub->add_option("--sampler-std", o.sampler_std, "restart std per coordinate in meters (default lambda/2)");
  };

  auto* crlb = app.add_subcommand("crlb", "Fisher information and CRLB of a scenario");
  common(crlb, true);
  crlb->add_flag("--unbanded", o.unbanded, "keep Fisher blocks of non-adjacent cells");

  auto* place = app.add_subcommand("place", "optimise the antenna geometry");
  place->require_subcommand(1);
  auto* single = place->add_subcommand("single", "one target: SDP relaxation and recovery");
  common(single, true);
  auto* multi = place->add_subcommand("multi", "any targets: restart sampler");
  common(multi, true);
  sampler(multi);

  auto* sweep = app.add_subcommand("sweep", "CRLB sweep along one axis");
  common(sweep, true);
  sampler(sweep);
  sweep->add_option("--axis", o.axis, "spacing|dtheta|antenna_count|target_count")->required();
  sweep->add_option("--range", o.range, "a:b:n")->required();
  sweep->add_option("--geometries", o.geometries, "ula,optimal,random,file:<path>")->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo RMSE against SNR");
  common(sim, true);
  sampler(sim);
  sim->add_option("--snr", o.snr, "a:b:n in dB")->capture_default_str();
  sim->add_option("--trials", o.trials, "trials per SNR point")->capture_default_str();
  sim->add_option("--geometries", o.geometries, "ula,optimal,random,file:<path>")->capture_default_str();

  auto* bound = app.add_subcommand("bound", "interval of steering phase separations");
  common(bound, false);
  bound->add_option("--dtheta", o.dtheta, "a:b:n in radians")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (o.threads < 1) throw UsageError("--threads must be >= 1");
    if (*crlb) return run_crlb(o);
    if (*single) return run_place(o, "single");
    if (*multi) return run_place(o, "multi");
    if (*sweep) return run_sweep(o);
    if (*sim) return run_simulate(o);
    if (*bound) return run_bound(o);
  } catch (const SingularFim& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SingularRestriction& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const RecoveryInfeasible& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const AllRestartsFailed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const GridTooCoarse& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
