#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sirius/deployment_loop.hpp"
#include "sirius/errors.hpp"
#include "sirius/experiments.hpp"
#include "sirius/metrics_report.hpp"
#include "sirius/oracle.hpp"
#include "sirius/teleop_gateway.hpp"
#include "sirius/trajectory_io.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

sirius::TaskConfig load_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sirius::ConfigError("cannot read task file " + path);
  try {
    auto task = nlohmann::json::parse(in).get<sirius::TaskConfig>();
    task.validate();
    return task;
  } catch (const nlohmann::json::exception& e) {
    throw sirius::ConfigError(path + ": " + e.what());
  }
}

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw sirius::ConfigError("not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<sirius::EvictionStrategy> parse_strategies(const std::string& list) {
  if (list == "all") return {sirius::kAllStrategies.begin(), sirius::kAllStrategies.end()};
  std::vector<sirius::EvictionStrategy> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(sirius::eviction_strategy_from_string(item));
  return out;
}

void cmd_demo_gen(const std::string& task_path, const std::filesystem::path& out, int count, std::int64_t seed) {
  if (count < 1) throw sirius::ConfigError("--count must be >= 1");
  const sirius::TaskConfig task = load_task(task_path);
  std::filesystem::create_directories(out);
  sirius::DatasetManifest manifest{task.task_id, {}};
  for (int k = 0; k < count; ++k) {
    const auto traj = sirius::generate_demo(task, sirius::derive_seed(seed, 1, k));
    const std::string name = fmt::format("demo_{:04d}.jsonl", k);
    std::ofstream file(out / name, std::ios::binary | std::ios::trunc);
    sirius::write_trajectory(file, traj, task.task_id);
    manifest.files.push_back(name);
  }
  sirius::write_manifest(out, manifest);
  spdlog::info("wrote {} demonstrations to {}", count, out.string());
}

void cmd_run(const std::string& config_path, const std::filesystem::path& out, bool sequential) {
  sirius::RunConfig config = sirius::load_run_config(config_path);
  if (sequential) config.parallel = false;
  sirius::RunOptions options;
  options.out_dir = out;
  const auto result = sirius::run(config, options);
  const std::filesystem::path dirs[] = {out};
  sirius::write_aggregate_report(dirs, out);
  for (const auto& r : result.records) {
    spdlog::info("round {}: pi_{} success {:.3f}, data round {} intv ratio {:.3f}", r.round, r.trained_policy,
                 r.eval_success, r.deployment.data_round, r.deployment.workload.intv_sample_ratio);
  }
}

void cmd_ablate(const std::string& config_path, const std::string& sweep, const std::filesystem::path& out,
                const std::string& grid, int points) {
  const sirius::RunConfig config = sirius::load_run_config(config_path);
  if (sweep != "intv_ratio" && sweep != "remove_class") {
    throw sirius::ConfigError("--sweep must be intv_ratio or remove_class");
  }
  std::filesystem::create_directories(out);
  const sirius::Dataset data = sirius::round1_dataset(config);
  std::vector<sirius::SettingResult> rows;
  if (sweep == "remove_class") {
    rows = sirius::ablate_remove_class(data, config);
  } else {
    const std::vector<double> values =
        grid.empty() ? sirius::default_intv_ratio_grid(sirius::class_distribution(data),
                                                       config.weighting.p_star_preintv, points)
                     : parse_doubles(grid);
    rows = sirius::ablate_intv_ratio(data, config, values);
  }
  sirius::write_settings_csv(out / (sweep + ".csv"), rows);
}

void cmd_bench_memory(const std::string& config_path, const std::string& strategies, const std::string& caps,
                      const std::filesystem::path& out, const std::string& run_dir) {
  sirius::RunConfig config = sirius::load_run_config(config_path);
  const auto strategy_list = parse_strategies(strategies);
  const auto cap_list = parse_doubles(caps);
  std::filesystem::create_directories(out);
  std::vector<std::vector<sirius::Trajectory>> stream;
  if (!run_dir.empty()) {
    stream = sirius::read_run_stream(run_dir, config.rounds);
  } else {
    config.memory.capacity = static_cast<std::size_t>(config.max_episodes_per_round) *
                             static_cast<std::size_t>(config.rounds + 1);
    const auto result = sirius::run(config);
    stream.assign(result.rounds.begin(), result.rounds.begin() + config.rounds + 1);
  }
  const auto rows = sirius::bench_memory(stream, config, strategy_list, cap_list);
  sirius::write_memory_bench_csv(out / "memory_bench.csv", rows);
}

void cmd_report(const std::vector<std::string>& runs, const std::filesystem::path& out) {
  std::vector<std::filesystem::path> dirs(runs.begin(), runs.end());
  sirius::write_aggregate_report(dirs, out);
}

void cmd_serve(const std::string& config_path, int port, const std::filesystem::path& out, int tick_hz) {
  sirius::RunConfig config = sirius::load_run_config(config_path);
  sirius::GatewayOptions options;
  options.port = static_cast<unsigned short>(port);
  options.tick_hz = tick_hz;
  sirius::serve_run(config, options, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-in-the-loop deployment and learning on a 2D pick-and-insert task"};
  app.require_subcommand(1);

  std::string task_path = "tasks/pick_insert.json";
  std::string config_path;
  std::string out;
  int count = 50;
  std::int64_t seed = 0;
  bool sequential = false;
  std::string sweep;
  std::string grid;
  int points = 5;
  std::string strategies = "all";
  std::string caps = "0.15,0.3,1.0";
  std::string run_dir;
  std::vector<std::string> runs;
  int port = 8765;
  int tick_hz = 8;

  auto* demo = app.add_subcommand("demo-gen", "Write scripted demonstrations, one file per episode");
  demo->add_option("--task", task_path, "Task JSON")->check(CLI::ExistingFile);
  demo->add_option("--out", out, "Output directory")->required();
  demo->add_option("--count", count, "Number of demonstrations");
  demo->add_option("--seed", seed, "Seed");

  auto* run = app.add_subcommand("run", "Run the deployment-learning loop");
  run->add_option("--config", config_path, "Run config JSON")->required();
  run->add_option("--out", out, "Run directory")->required();
  run->add_flag("--sequential", sequential, "Train and deploy one after the other");

  auto* ablate = app.add_subcommand("ablate", "Weighting ablations on Round-1 data");
  ablate->add_option("--config", config_path, "Run config JSON")->required();
  ablate->add_option("--sweep", sweep, "intv_ratio or remove_class")->required();
  ablate->add_option("--out", out, "Output directory")->required();
  ablate->add_option("--grid", grid, "Comma-separated P*(intv) values (intv_ratio only)");
  ablate->add_option("--points", points, "Default grid size (intv_ratio only)");

  auto* bench = app.add_subcommand("bench-memory", "Compare eviction strategies under memory caps");
  bench->add_option("--config", config_path, "Run config JSON")->required();
  bench->add_option("--strategies", strategies, "all or a comma-separated list");
  bench->add_option("--caps", caps, "Comma-separated capacity fractions");
  bench->add_option("--out", out, "Output directory")->required();
  bench->add_option("--run-dir", run_dir, "Replay a recorded run instead of collecting a new one");

  auto* report = app.add_subcommand("report", "Aggregate run directories");
  report->add_option("--runs", runs, "Run directories")->required();
  report->add_option("--out", out, "Output directory")->required();

  auto* serve = app.add_subcommand("serve", "Run with a live operator connected over a web socket");
  serve->add_option("--config", config_path, "Run config JSON")->required();
  serve->add_option("--port", port, "Listen port");
  serve->add_option("--out", out, "Run directory")->required();
  serve->add_option("--tick-hz", tick_hz, "Environment steps per second (0 = unpaced)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*demo) cmd_demo_gen(task_path, out, count, seed);
    if (*run) cmd_run(config_path, out, sequential);
    if (*ablate) cmd_ablate(config_path, sweep, out, grid, points);
    if (*bench) cmd_bench_memory(config_path, strategies, caps, out, run_dir);
    if (*report) cmd_report(runs, out);
    if (*serve) cmd_serve(config_path, port, out, tick_hz);
  } catch (const sirius::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return EXIT_SUCCESS;
}
