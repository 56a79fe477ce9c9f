#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sirius/core_data.hpp"
#include "sirius/trainer.hpp"

namespace sirius {

struct WorkloadMetrics {
  double intv_sample_ratio = 0.0;
  double intv_frequency = 0.0;
  double mean_intv_length = 0.0;
  /// True when the round had no intervention segment (mean length reported as 0).
  bool no_segments = true;
  std::int64_t n_rollouts = 0;
};

void to_json(nlohmann::json& j, const WorkloadMetrics& m);
void from_json(const nlohmann::json& j, WorkloadMetrics& m);

/// intv samples / all samples. Throws EmptyRound.
double intervention_sample_ratio(std::span<const Trajectory> round);
/// Intervention segments per rollout. Throws EmptyRound.
double intervention_frequency(std::span<const Trajectory> round);

struct MeanLength {
  double value = 0.0;
  bool empty = true;
};
MeanLength mean_intervention_length(std::span<const Trajectory> round);

WorkloadMetrics workload_metrics(std::span<const Trajectory> round);

/// First logged epoch whose evaluation success reaches `target`.
std::optional<int> convergence_epochs(const TrainingLog& log, double target = 0.9);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};
MeanStd mean_std(std::span<const double> values);

/// Per-round aggregate across runs.
struct RoundAggregate {
  int round = 0;
  int n_runs = 0;
  MeanStd success;
  MeanStd top3_success;
  MeanStd intv_ratio;
  MeanStd intv_frequency;
  MeanStd intv_length;
  MeanStd episodes;
};

struct AggregateReport {
  std::vector<RoundAggregate> rounds;
};

/// Reads records.json from each run directory. Throws MismatchedConfigs when
/// runs disagree on the number of rounds.
AggregateReport aggregate(std::span<const std::filesystem::path> run_dirs);

/// Writes report.csv, timeline.csv and convergence.csv into `out_dir`.
AggregateReport write_aggregate_report(std::span<const std::filesystem::path> run_dirs,
                                       const std::filesystem::path& out_dir);

}  // namespace sirius
