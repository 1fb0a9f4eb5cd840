// Command-line front end: simulate, estimate, evaluate, characterize-noise, benchmark.
#include "pushest/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using namespace pushest;

namespace {

struct Common {
  std::string scenario_file;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string estimator = "all";
  std::optional<std::size_t> window;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--scenario", c.scenario_file, "Scenario JSON file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Noise seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--estimator", c.estimator, "smoother|ekf|baseline|all")
      ->check(CLI::IsMember({"smoother", "ekf", "baseline", "all"}));
  app->add_option("--window", c.window, "Smoother window length in steps")->check(CLI::PositiveNumber);
}

Scenario load_scenario(const Common& c) {
  Scenario s = c.scenario_file.empty() ? Scenario::standard(c.seed.value_or(1))
                                       : Scenario::load(c.scenario_file);
  if (c.seed) {
    s.seed = *c.seed;
    s.noise.seed = *c.seed;
  }
  if (c.window) s.window = WindowConfig::with_length(*c.window);
  if (c.estimator != "all") s.estimators = {parse_method(c.estimator)};
  return s;
}

void write_json(const fs::path& file, const nlohmann::json& j) {
  std::ofstream out(file);
  out << j.dump(2) << '\n';
}

nlohmann::json summary_json(const RunReport& report) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& run : report.runs) {
    j[method_name(run.method)] = {{"trans_rmse_mm", run.rmse.trans_rmse_mm},
                                  {"trans_std_mm", run.rmse.trans_std_mm},
                                  {"rot_rmse_deg", run.rmse.rot_rmse_deg},
                                  {"rot_std_deg", run.rmse.rot_std_deg},
                                  {"steps", run.records.size()}};
  }
  return j;
}

void print_summary(const RunReport& report) {
  std::printf("%-10s %18s %18s\n", "method", "trans RMSE [mm]", "rot RMSE [deg]");
  for (const auto& run : report.runs) {
    std::printf("%-10s %8.2f +- %-7.2f %8.2f +- %-7.2f\n", method_name(run.method).c_str(),
                run.rmse.trans_rmse_mm, run.rmse.trans_std_mm, run.rmse.rot_rmse_deg,
                run.rmse.rot_std_deg);
  }
}

int cmd_simulate(const Common& c) {
  const Scenario s = load_scenario(c);
  const SensorStreams streams = simulate_scenario(s);
  write_streams(c.out, streams);
  write_json(fs::path(c.out) / "scenario.json", s.to_json());
  std::printf("simulated %.2f s: %zu sim steps, %zu visual, %zu tactile samples -> %s\n",
              streams.ground_truth.duration(), streams.ground_truth.steps.size(),
              streams.visual.size(), streams.tactile.size(), c.out.c_str());
  return 0;
}

int cmd_estimate(const Common& c, const std::string& streams_dir, bool timing) {
  const Scenario s = load_scenario(c);
  const SensorStreams streams = streams_dir.empty() ? simulate_scenario(s) : read_streams(streams_dir);
  const RunReport report = run_estimators(s, streams);
  fs::create_directories(c.out);
  std::ofstream csv(fs::path(c.out) / "trajectory.csv");
  write_trajectory_csv(csv, report, timing);
  write_json(fs::path(c.out) / "summary.json", summary_json(report));
  print_summary(report);
  return 0;
}

// RMSE recomputed from a trajectory CSV.
int cmd_evaluate_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::pair<std::vector<Pose2>, std::vector<Pose2>>> per_method;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 8) throw std::runtime_error("malformed trajectory row: " + line);
    auto& [est, gt] = per_method[cells[7]];
    if (est.empty()) order.push_back(cells[7]);
    gt.emplace_back(std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]));
    est.emplace_back(std::stod(cells[4]), std::stod(cells[5]), std::stod(cells[6]));
  }
  RunReport report;
  for (const auto& name : order) {
    MethodRun run;
    run.method = parse_method(name);
    const auto& [est, gt] = per_method[name];
    run.rmse = rmse(est, gt);
    report.runs.push_back(run);
  }
  print_summary(report);
  return 0;
}

// Mean RMSE over consecutive seeds.
int cmd_evaluate_seeds(const Common& c, std::size_t seeds) {
  const Scenario base = load_scenario(c);
  std::map<Method, RmseReport> sum;
  for (std::size_t k = 0; k < seeds; ++k) {
    Scenario s = base;
    s.seed = base.seed + k;
    s.noise.seed = s.seed;
    const RunReport report = run_scenario(s);
    std::printf("seed %llu\n", static_cast<unsigned long long>(s.seed));
    print_summary(report);
    for (const auto& run : report.runs) {
      RmseReport& acc = sum[run.method];
      acc.trans_rmse_mm += run.rmse.trans_rmse_mm / static_cast<double>(seeds);
      acc.trans_std_mm += run.rmse.trans_std_mm / static_cast<double>(seeds);
      acc.rot_rmse_deg += run.rmse.rot_rmse_deg / static_cast<double>(seeds);
      acc.rot_std_deg += run.rmse.rot_std_deg / static_cast<double>(seeds);
    }
  }
  std::printf("mean over %zu seeds\n", seeds);
  RunReport mean;
  for (Method m : base.estimators) {
    MethodRun run;
    run.method = m;
    run.rmse = sum[m];
    mean.runs.push_back(run);
  }
  print_summary(mean);
  return 0;
}

int cmd_characterize(const Common& c, std::size_t seeds) {
  const Scenario base = load_scenario(c);
  std::vector<ResidualRecord> all;
  for (std::size_t k = 0; k < seeds; ++k) {
    Scenario s = base;
    s.seed = base.seed + k;
    s.noise.seed = s.seed;
    const auto records = ground_truth_residuals(s, simulate_scenario(s));
    all.insert(all.end(), records.begin(), records.end());
  }
  fs::create_directories(c.out);
  {
    std::ofstream csv(fs::path(c.out) / "residuals.csv");
    write_residual_csv(csv, all);
  }
  const Covariances cov = identify_covariances(all);
  write_json(fs::path(c.out) / "covariances.json", {{"covariances", covariances_to_json(cov)}});

  std::ofstream qq(fs::path(c.out) / "qq.csv");
  qq << "kind,axis,theoretical,sample\n";
  std::printf("%-4s %-4s %8s %14s %14s %8s %8s\n", "kind", "axis", "samples", "mean", "std", "KS",
              "band");
  for (FactorKind kind :
       {FactorKind::Motion, FactorKind::Contact, FactorKind::Visual, FactorKind::Stationary}) {
    const auto vectors = residual_vectors(all, kind);
    if (vectors.size() < 30) continue;
    const auto report = normality_report(vectors);
    for (std::size_t a = 0; a < report.size(); ++a) {
      const auto& ax = report[a];
      std::printf("%-4c %-4zu %8zu %14.6e %14.6e %8.4f %8.4f\n", kind_letter(kind), a,
                  vectors.size(), ax.mean, ax.stddev, ax.ks_statistic, ax.ks_threshold);
      for (const auto& [theory, sample] : ax.qq) {
        qq << kind_letter(kind) << ',' << a << ',' << theory << ',' << sample << '\n';
      }
    }
  }
  std::printf("identified covariances -> %s\n", (fs::path(c.out) / "covariances.json").c_str());
  return 0;
}

int cmd_benchmark(const Common& c) {
  Scenario s = load_scenario(c);
  if (!c.window) s.window = WindowConfig{};
  s.estimators = {Method::Smoother};
  const RunReport report = run_scenario(s);
  const MethodRun& run = report.get(Method::Smoother);
  fs::create_directories(c.out);
  std::ofstream csv(fs::path(c.out) / "timing.csv");
  csv << "t,step_ms\n";
  for (const auto& r : run.records) csv << r.t << ',' << r.step_ms << '\n';
  write_json(fs::path(c.out) / "timing.json", {{"window_len", s.window.window_len},
                                               {"steps", run.records.size()},
                                               {"mean_ms", run.timing.mean_ms},
                                               {"std_ms", run.timing.std_ms},
                                               {"max_ms", run.timing.max_ms}});
  std::printf("window %zu, %zu steps: mean %.3f ms, std %.3f ms, max %.3f ms\n",
              s.window.window_len, run.records.size(), run.timing.mean_ms, run.timing.std_ms,
              run.timing.max_ms);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar pushing pose estimation from tactile and visual data"};
  app.require_subcommand(1);

  Common sim_opts, est_opts, eval_opts, noise_opts, bench_opts;
  auto* sim = app.add_subcommand("simulate", "Simulate a scenario and write the sensor streams");
  add_common(sim, sim_opts);

  auto* est = app.add_subcommand("estimate", "Run estimators and write the trajectory CSV");
  add_common(est, est_opts);
  std::string streams_dir;
  bool timing = false;
  est->add_option("--streams", streams_dir, "Read streams written by simulate instead of simulating")
      ->check(CLI::ExistingDirectory);
  est->add_flag("--timing", timing, "Write measured step_ms (output is then not reproducible)");

  auto* eval = app.add_subcommand("evaluate", "RMSE from a trajectory CSV or over several seeds");
  add_common(eval, eval_opts);
  std::string trajectory;
  std::size_t eval_seeds = 10;
  eval->add_option("--trajectory", trajectory, "Trajectory CSV to evaluate")->check(CLI::ExistingFile);
  eval->add_option("--seeds", eval_seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);

  auto* noise = app.add_subcommand("characterize-noise",
                                   "Identify factor covariances from ground-truth residuals");
  add_common(noise, noise_opts);
  std::size_t noise_seeds = 1;
  noise->add_option("--seeds", noise_seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("benchmark", "Per-step smoother update timing");
  add_common(bench, bench_opts);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(sim_opts);
    if (*est) return cmd_estimate(est_opts, streams_dir, timing);
    if (*eval) {
      return trajectory.empty() ? cmd_evaluate_seeds(eval_opts, eval_seeds)
                                : cmd_evaluate_csv(trajectory);
    }
    if (*noise) return cmd_characterize(noise_opts, noise_seeds);
    if (*bench) return cmd_benchmark(bench_opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
