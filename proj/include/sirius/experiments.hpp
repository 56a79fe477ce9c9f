#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sirius/deployment_loop.hpp"

namespace sirius {

/// Outcome of retraining one policy on a fixed dataset.
struct SettingResult {
  std::string name;
  /// P*(intv) for ratio sweeps; unset for other settings.
  std::optional<double> p_star_intv;
  bool feasible = true;
  std::string reason;
  double success = 0.0;
  std::optional<double> top3_success;
  std::optional<int> convergence_epoch;
};

/// Trains one policy with `scheme` on `dataset`, using the training seed of
/// pi_{policy_index} so that settings compared on the same data are paired.
SettingResult train_setting(const std::string& name, const Dataset& dataset, const WeightingScheme& scheme,
                            const RunConfig& config, int policy_index);

/// Demos plus the first deployment round collected by pi_1 (the data pi_2 trains on).
Dataset round1_dataset(const RunConfig& config);

/// Rows: full, -demo, -intv, -preintv.
std::vector<SettingResult> ablate_remove_class(const Dataset& dataset, const RunConfig& config);

/// `n` evenly spaced P*(intv) values from the unweighted ratio P(intv) up to
/// the value that leaves no robot mass.
std::vector<double> default_intv_ratio_grid(const ClassDistribution& p, double p_star_preintv, int n = 5);

/// One row per grid value; infeasible points are flagged and not trained.
std::vector<SettingResult> ablate_intv_ratio(const Dataset& dataset, const RunConfig& config,
                                             std::span<const double> grid);

void write_settings_csv(const std::filesystem::path& path, std::span<const SettingResult> rows);

struct MemoryBenchRow {
  /// "Base" keeps every trajectory.
  std::string strategy;
  double cap_fraction = 1.0;
  std::size_t capacity = 0;
  std::size_t retained_trajectories = 0;
  std::int64_t retained_intv = 0;
  SettingResult result;
};

/// Replays `stream` (data rounds in collection order, demos first) through
/// a buffer for every strategy and cap, then retrains on what is kept. The
/// cap is a fraction of the accumulated non-demo trajectories.
std::vector<MemoryBenchRow> bench_memory(std::span<const std::vector<Trajectory>> stream, const RunConfig& config,
                                         std::span<const EvictionStrategy> strategies, std::span<const double> caps);

void write_memory_bench_csv(const std::filesystem::path& path, std::span<const MemoryBenchRow> rows);

/// Data rounds 0..rounds read back from a run directory.
std::vector<std::vector<Trajectory>> read_run_stream(const std::filesystem::path& run_dir, int rounds);

}  // namespace sirius
