#include "sirius/experiments.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>

#include "sirius/errors.hpp"
#include "sirius/trajectory_io.hpp"

namespace sirius {

SettingResult train_setting(const std::string& name, const Dataset& dataset, const WeightingScheme& scheme,
                            const RunConfig& config, int policy_index) {
  SettingResult r;
  r.name = name;
  TrainConfig tc = config.train;
  tc.seed = policy_train_seed(config, policy_index);
  try {
    const TrainResult tr = train(dataset, scheme, config.arch, tc, config.task);
    if (tr.fell_back_to_unweighted) r.reason = "fell back to unweighted";
    r.success = evaluate(tr.best, config.task, tc.eval_episodes, tc.eval_seed).success_rate;
    try {
      r.top3_success = top_k_checkpoint_average(tr.log, 3);
    } catch (const InsufficientCheckpoints&) {
    }
    r.convergence_epoch = convergence_epochs(tr.log);
  } catch (const InfeasibleTarget& e) {
    r.feasible = false;
    r.reason = e.what();
  }
  spdlog::info("{}: success {:.3f} top3 {}", name, r.success,
               r.top3_success ? fmt::format("{:.3f}", *r.top3_success) : std::string("-"));
  return r;
}

Dataset round1_dataset(const RunConfig& config) {
  RunConfig c = config;
  c.rounds = std::max(c.rounds, 1);
  RunOptions options;
  options.stop_after_initial_deployment = true;
  RunResult result = run(c, options);
  return result.buffer.snapshot(c.task.task_id);
}

std::vector<SettingResult> ablate_remove_class(const Dataset& dataset, const RunConfig& config) {
  WeightingScheme full = config.weighting;
  full.kind = SchemeKind::sirius;
  full.ablation = {};
  std::vector<std::pair<std::string, WeightingScheme>> settings{{"full", full}};
  WeightingScheme s = full;
  s.ablation.remove_demo = true;
  settings.emplace_back("-demo", s);
  s = full;
  s.ablation.remove_intv = true;
  settings.emplace_back("-intv", s);
  s = full;
  s.ablation.remove_preintv = true;
  settings.emplace_back("-preintv", s);

  std::vector<SettingResult> rows;
  for (const auto& [name, scheme] : settings) rows.push_back(train_setting(name, dataset, scheme, config, 2));
  return rows;
}

std::vector<double> default_intv_ratio_grid(const ClassDistribution& p, double p_star_preintv, int n) {
  const double lo = p[ClassLabel::intv];
  const double hi = 1.0 - p[ClassLabel::demo] - p_star_preintv;
  std::vector<double> grid;
  if (n == 1) return {lo};
  for (int k = 0; k < n; ++k) grid.push_back(lo + (hi - lo) * k / (n - 1));
  grid.back() = hi;
  return grid;
}

std::vector<SettingResult> ablate_intv_ratio(const Dataset& dataset, const RunConfig& config,
                                             std::span<const double> grid) {
  const ClassDistribution p = class_distribution(dataset);
  const auto entries = sweep_targets(p, grid, config.weighting.p_star_preintv);
  std::vector<SettingResult> rows;
  for (const SweepEntry& e : entries) {
    const std::string name = fmt::format("intv={:.4f}", e.p_star_intv);
    if (!e.feasible) {
      SettingResult r;
      r.name = name;
      r.p_star_intv = e.p_star_intv;
      r.feasible = false;
      r.reason = e.reason;
      rows.push_back(r);
      continue;
    }
    WeightingScheme scheme;
    scheme.kind = SchemeKind::sirius;
    scheme.p_star_intv = e.p_star_intv;
    scheme.p_star_preintv = config.weighting.p_star_preintv;
    SettingResult r = train_setting(name, dataset, scheme, config, 2);
    r.p_star_intv = e.p_star_intv;
    rows.push_back(r);
  }
  return rows;
}

void write_settings_csv(const std::filesystem::path& path, std::span<const SettingResult> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "setting,p_star_intv,feasible,success,top3_success,convergence_epoch,note\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{:.6f},{},{},\"{}\"\n", r.name,
                       r.p_star_intv ? fmt::format("{:.6f}", *r.p_star_intv) : std::string(), r.feasible ? 1 : 0,
                       r.success, r.top3_success ? fmt::format("{:.6f}", *r.top3_success) : std::string(),
                       r.convergence_epoch ? std::to_string(*r.convergence_epoch) : std::string(), r.reason);
  }
}

std::vector<MemoryBenchRow> bench_memory(std::span<const std::vector<Trajectory>> stream, const RunConfig& config,
                                         std::span<const EvictionStrategy> strategies, std::span<const double> caps) {
  const int policy_index = static_cast<int>(stream.size());
  std::size_t accumulated = 0;
  Dataset all;
  all.task_id = config.task.task_id;
  for (const auto& round : stream) {
    for (const auto& t : round) {
      if (!t.is_demo()) ++accumulated;
      all.trajectories.push_back(t);
    }
  }
  std::int64_t all_intv = 0;
  for (const auto& t : all.trajectories) all_intv += intervention_count(t);

  std::vector<MemoryBenchRow> rows;
  MemoryBenchRow base;
  base.strategy = "Base";
  base.capacity = accumulated;
  base.retained_trajectories = all.trajectories.size();
  base.retained_intv = all_intv;
  base.result = train_setting("Base", all, config.weighting, config, policy_index);
  rows.push_back(base);

  for (double cap : caps) {
    if (!(cap > 0.0) || cap > 1.0) throw ConfigError(fmt::format("cap fraction {} outside (0, 1]", cap));
    const auto capacity = static_cast<std::size_t>(std::llround(cap * static_cast<double>(accumulated)));
    for (EvictionStrategy strategy : strategies) {
      MemoryConfig mc;
      mc.capacity = capacity;
      mc.strategy = strategy;
      mc.rng_seed = buffer_seed(config);
      mc.protect_demos = true;
      MemoryBuffer buffer(mc);
      for (const auto& round : stream) {
        for (const auto& t : round) buffer.insert(t);
      }
      MemoryBenchRow row;
      row.strategy = std::string(to_string(strategy));
      row.cap_fraction = cap;
      row.capacity = capacity;
      row.retained_trajectories = buffer.size();
      row.retained_intv = buffer.retained_intv_samples();
      if (buffer.size() == all.trajectories.size()) {
        row.result = base.result;
        row.result.name = row.strategy;
      } else {
        row.result = train_setting(fmt::format("{}@{:.2f}", row.strategy, cap), buffer.snapshot(all.task_id),
                                   config.weighting, config, policy_index);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_memory_bench_csv(const std::filesystem::path& path, std::span<const MemoryBenchRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "strategy,cap_fraction,capacity,retained_trajectories,retained_intv,success,top3_success,"
         "convergence_epoch\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{:.4f},{},{},{},{:.6f},{},{}\n", r.strategy, r.cap_fraction, r.capacity,
                       r.retained_trajectories, r.retained_intv, r.result.success,
                       r.result.top3_success ? fmt::format("{:.6f}", *r.result.top3_success) : std::string(),
                       r.result.convergence_epoch ? std::to_string(*r.result.convergence_epoch) : std::string());
  }
}

std::vector<std::vector<Trajectory>> read_run_stream(const std::filesystem::path& run_dir, int rounds) {
  std::vector<std::vector<Trajectory>> stream;
  for (int k = 0; k <= rounds; ++k) {
    const auto file = run_dir / fmt::format("round_{:03d}.jsonl", k);
    if (!std::filesystem::exists(file)) throw Error("missing " + file.string());
    stream.push_back(read_trajectory_file(file));
  }
  return stream;
}

}  // namespace sirius
