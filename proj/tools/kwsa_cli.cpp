// kwsa: generate instances, run Monte Carlo experiments, fit rates.
//
//   kwsa gen  [--nodes N] [--radius R|auto] [--seed S] [--out DIR] ...
//   kwsa run  [--config FILE] [--data DIR] [--runs R] [--iters K] [--pfail LIST] ...
//   kwsa rate TRACE.csv [--window W] [--column mse|disagreement_sq|avg_gap_sq]
//
// Exit codes: 0 success, 2 config/assumption violation, 3 divergence,
// 4 I/O or malformed input file.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kwsa/config.hpp"
#include "kwsa/experiment.hpp"
#include "kwsa/instance.hpp"
#include "kwsa/manifest.hpp"

namespace fs = std::filesystem;
using namespace kwsa;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 2, kDivergence = 3, kIo = 4 };

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file ([section] key = value)");
    for (const auto& k : config_schema()) {
      auto* opt = cmd->add_option("--" + k.key, values[k.key], k.help + " [" + k.default_value + "]");
      options.emplace_back(k.key, opt);
    }
  }

  /// Defaults, then the config file, then explicit flags.
  Config resolve() const {
    Config cfg = Config::defaults();
    if (!config_path.empty()) cfg.load_ini(read_file(config_path));
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) cfg.set(key, values.at(key));
    return cfg;
  }
};

GeometricGraphSpec graph_spec_from(const Config& cfg) {
  GeometricGraphSpec spec;
  spec.num_nodes = cfg.u64("nodes");
  spec.connection_radius = cfg.real_or_auto("radius");
  spec.retry_limit = cfg.u64("retry_limit");
  spec.max_degree = cfg.u64("max_degree");
  return spec;
}

DatasetSpec dataset_spec_from(const Config& cfg) {
  DatasetSpec spec;
  spec.num_nodes = cfg.u64("nodes");
  spec.points_per_node = cfg.u64("points");
  spec.feature_dim = cfg.u64("feature_dim");
  spec.kappa = cfg.real("kappa");
  return spec;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (double x : xs) s += (s.empty() ? "" : ",") + format_double(x);
  return s;
}

std::string join(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v(i));
  return s;
}

int cmd_gen(const Config& cfg) {
  const auto graph_spec = graph_spec_from(cfg);
  const ProblemInstance inst = generate_instance(graph_spec, dataset_spec_from(cfg), cfg.u64("seed"));
  const fs::path out = cfg.text("out");
  write_instance(inst, out);

  Manifest m;
  m.set("tool", "gen");
  m.set("seed", cfg.raw("seed"));
  m.set("nodes", cfg.raw("nodes"));
  m.set("radius", cfg.raw("radius"));
  m.set("max_degree", cfg.raw("max_degree"));
  m.set("edges", std::to_string(inst.graph.num_edges()));
  m.set("points", cfg.raw("points"));
  m.set("feature_dim", cfg.raw("feature_dim"));
  m.set("kappa", cfg.raw("kappa"));
  m.set("graph_file", kGraphFile);
  m.set("graph_hash", inst.graph_hash());
  m.set("dataset_hash", inst.dataset_hash());
  write_file((out / "manifest.txt").string(), m.to_text());

  std::cout << "wrote " << inst.graph.num_nodes() << "-node graph (" << inst.graph.num_edges()
            << " links, max degree " << inst.graph.max_degree() << ") and " << inst.dataset_files.size()
            << " dataset files to " << out.string() << "\n";
  return kOk;
}

std::string series_file(const ExperimentSeries& s) {
  return s.p_fail ? "trace_pfail_" + format_double(*s.p_fail) + ".csv" : "trace_centralized.csv";
}

std::string fit_cell(const RunTrace& trace, Metric m, double window) {
  try {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", estimate_rate(metric_series(trace, m), window).slope);
    return buf;
  } catch (const RateUndefined&) {
    return "n/a";
  }
}

int cmd_run(const Config& cfg) {
  const std::uint64_t seed = cfg.u64("seed");
  const std::string data_dir = cfg.text("data");
  const ProblemInstance inst = data_dir.empty()
                                   ? generate_instance(graph_spec_from(cfg), dataset_spec_from(cfg), seed)
                                   : load_instance(data_dir);
  const std::size_t n = inst.graph.num_nodes();
  const std::size_t d = inst.objectives.front().dimension();

  WeightSchedule schedule;
  schedule.alpha0 = cfg.real("alpha0");
  schedule.beta0 = cfg.real_or_auto("beta0").value_or(1.0 / static_cast<double>(std::max<std::size_t>(1, inst.graph.max_degree())));
  schedule.c0 = cfg.real("c0");
  schedule.delta = cfg.real("delta");
  schedule.tau = cfg.real("tau");

  const NoiseModel noise = cfg.text("noise") == "gaussian" ? NoiseModel::gaussian(cfg.real("sigma"))
                                                           : NoiseModel::state_scaled(cfg.real("sigma"), cfg.real("c_f"));
  AlgorithmConfig base{RandomNetworkModel(inst.graph, 0.0), inst.objectives, noise, schedule,
                       Iterates::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)), cfg.u64("iters"), seed, 0};
  if (const auto report = validate_schedule(schedule, base.min_local_mu()); !report) {
    std::cerr << "error: schedule rejected: " << report.message() << "\n";
    return kConfig;
  }

  const Vector x_star = solve_ground_truth(inst.objectives, cfg.real("truth_tol"));
  ExperimentPlan plan(std::move(base));
  plan.p_fails = cfg.reals("pfail");
  plan.num_runs = cfg.u64("runs");
  plan.x_star = x_star;
  plan.window = cfg.real("window");
  plan.grid = RecordingGrid(cfg.real("grid_ratio"));
  const std::string baseline = cfg.text("baseline");
  if (baseline != "none") {
    CentralizedConfig c;
    c.mode = baseline == "sgd" ? CentralizedConfig::Mode::sgd_fusion : CentralizedConfig::Mode::kwsa_fusion;
    c.objectives = inst.objectives;
    c.noise = noise;
    c.schedule = schedule;
    // The fusion node descends the sum of N objectives: step alpha_k / N.
    if (c.mode == CentralizedConfig::Mode::kwsa_fusion) c.schedule.alpha0 /= static_cast<double>(n);
    c.initial = Vector::Zero(static_cast<Eigen::Index>(d));
    c.max_iterations = plan.base.max_iterations;
    c.seed = seed;
    plan.baseline = std::move(c);
  }

  const ExperimentResult result = monte_carlo(plan, cfg.u64("jobs"));

  const fs::path out = cfg.text("out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create directory " + out.string() + ": " + ec.message());

  std::vector<const ExperimentSeries*> all;
  for (const auto& s : result.distributed) all.push_back(&s);
  if (result.centralized) all.push_back(&*result.centralized);

  Manifest m;
  m.set("tool", "run");
  m.set("seed", std::to_string(seed));
  m.set("runs", cfg.raw("runs"));
  m.set("iters", cfg.raw("iters"));
  m.set("pfail", join(plan.p_fails));
  m.set("baseline", baseline);
  m.set("schedule", "alpha0=" + format_double(schedule.alpha0) + " beta0=" + format_double(schedule.beta0) +
                        " c0=" + format_double(schedule.c0) + " delta=" + format_double(schedule.delta) +
                        " tau=" + format_double(schedule.tau));
  m.set("noise", cfg.text("noise") + " sigma=" + cfg.raw("sigma") + " c_f=" + cfg.raw("c_f"));
  m.set("graph_file", data_dir.empty() ? std::string("(generated)") : (fs::path(data_dir) / kGraphFile).string());
  m.set("graph_hash", inst.graph_hash());
  m.set("dataset_hash", inst.dataset_hash());
  m.set("x_star", join(x_star));
  for (const auto* s : all) {
    write_file((out / series_file(*s)).string(), to_csv(s->mean));
    m.set(s->p_fail ? "trace_pfail_" + format_double(*s->p_fail) : "trace_centralized", series_file(*s));
  }
  write_file((out / "manifest.txt").string(), m.to_text());
  write_file((out / "config.ini").string(), cfg.to_ini());

  std::printf("%-14s %14s %10s %12s %14s\n", "series", "final_mse", "mse_slope", "dis_slope", "queries");
  for (const auto* s : all) {
    const auto& last = s->mean.records.back();
    const std::string label = s->p_fail ? "pfail=" + format_double(*s->p_fail) : "centralized";
    std::printf("%-14s %14.6g %10s %12s %14llu\n", label.c_str(), last.mse,
                fit_cell(s->mean, Metric::mse, plan.window).c_str(),
                s->p_fail ? fit_cell(s->mean, Metric::disagreement_sq, plan.window).c_str() : "-",
                static_cast<unsigned long long>(last.queries));
  }
  std::cout << "traces written to " << out.string() << "\n";
  return kOk;
}

int cmd_rate(const std::string& csv_path, double window, const std::string& column) {
  const RunTrace trace = parse_csv(read_file(csv_path));
  const std::vector<std::pair<std::string, Metric>> columns = {
      {"mse", Metric::mse}, {"disagreement_sq", Metric::disagreement_sq}, {"avg_gap_sq", Metric::avg_gap_sq}};
  std::optional<RateFit> selected;
  for (const auto& [name, metric] : columns) {
    try {
      const RateFit fit = estimate_rate(metric_series(trace, metric), window);
      std::cout << name << ": slope " << format_double(fit.slope) << ", intercept " << format_double(fit.intercept)
                << ", r^2 " << format_double(fit.r_squared) << ", points " << fit.points << "\n";
      if (name == column) selected = fit;
    } catch (const RateUndefined& e) {
      std::cout << name << ": undefined (" << e.what() << ")\n";
      if (name == column) throw;
    }
  }
  std::cout << "slope=" << format_double(selected->slope) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Kiefer-Wolfowitz optimisation over randomly failing networks"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, run_flags;
  auto* gen = app.add_subcommand("gen", "generate a geometric graph and per-node logistic datasets");
  gen_flags.attach(gen);
  auto* run = app.add_subcommand("run", "run the Monte Carlo experiment and write trace CSVs");
  run_flags.attach(run);

  std::string csv_path, column = "mse";
  double window = 0.25;
  auto* rate = app.add_subcommand("rate", "fit log-log slopes to a trace CSV");
  rate->add_option("csv", csv_path, "trace CSV written by `run`")->required();
  rate->add_option("--window", window, "tail fraction of the log-k range [0.25]");
  rate->add_option("--column", column, "column reported on the slope= line [mse]")
      ->check(CLI::IsMember({"mse", "disagreement_sq", "avg_gap_sq"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return cmd_gen(gen_flags.resolve());
    if (*run) return cmd_run(run_flags.resolve());
    return cmd_rate(csv_path, window, column);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const ConvergenceFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    // ConfigError, InvariantViolation, GenerationFailure, RateUndefined, ...
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
}
