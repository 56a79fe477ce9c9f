#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "sirius/core_data.hpp"
#include "sirius/env2d.hpp"
#include "sirius/labeling.hpp"
#include "sirius/memory.hpp"
#include "sirius/metrics_report.hpp"
#include "sirius/oracle.hpp"
#include "sirius/policy_gmm.hpp"
#include "sirius/trainer.hpp"
#include "sirius/weighting.hpp"

namespace sirius {

struct RunConfig {
  TaskConfig task;
  InterventionModel oracle;
  LabelingConfig labeling;
  WeightingScheme weighting;
  PolicyArch arch;
  TrainConfig train;
  MemoryConfig memory;
  /// M: initial demonstrations.
  int demos = 50;
  /// X: deployment-learning iterations after the initial deployment.
  int rounds = 3;
  int max_episodes_per_round = 300;
  /// Run learning and deployment concurrently within a round.
  bool parallel = true;
  /// Robot actions during deployment are drawn from the mixture; false uses
  /// the deterministic evaluation action instead.
  bool sample_rollouts = true;
  std::int64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);
/// Parses a run config; "task_file" is resolved relative to the config's directory.
RunConfig load_run_config(const std::filesystem::path& path);

/// Intervention quota per round: ceil(demo samples / 3).
std::int64_t intervention_quota(std::int64_t demo_samples);

/// Deterministic seed derivation for every stochastic component of a run.
std::int64_t derive_seed(std::int64_t run_seed, std::int64_t stream, std::int64_t index = 0);

/// Training seed for pi_j in a run; reused by offline retraining so that
/// comparisons on the same data share the initial parameters and minibatches.
std::int64_t policy_train_seed(const RunConfig& config, int policy_index);
/// Seed of the buffer's uniform-eviction stream.
std::uint64_t buffer_seed(const RunConfig& config);

/// Decides, step by step, who controls the robot during a deployment episode.
class Intervenor {
 public:
  virtual ~Intervenor() = default;
  virtual void begin_episode(const EnvState& initial, std::int64_t episode_seed, int round) = 0;
  virtual Arbitration decide(const EnvState& state, const EnvAction& robot_action) = 0;
  virtual void observe(const StepResult& /*result*/) {}
  virtual void end_episode(const Trajectory& /*trajectory*/) {}
  virtual TrajectorySource source() const = 0;
};

/// Monitor + arbitrate with the scripted expert as the human.
class ScriptedIntervenor final : public Intervenor {
 public:
  ScriptedIntervenor(TaskConfig task, InterventionModel model);

  void begin_episode(const EnvState& initial, std::int64_t episode_seed, int round) override;
  Arbitration decide(const EnvState& state, const EnvAction& robot_action) override;
  void observe(const StepResult& result) override;
  TrajectorySource source() const override { return TrajectorySource::scripted_oracle; }

 private:
  TaskConfig task_;
  InterventionModel model_;
  StateHistory history_;
  ControlOwner owner_;
};

/// Team-policy rollout; robot actions are sampled from the policy. Labels are
/// as decided by the intervenor (no preintv pass yet).
Trajectory rollout_episode(const PolicyParams& policy, const TaskConfig& task, std::int64_t episode_seed,
                           int round, Intervenor& intervenor);

/// Robot action source; exposed so tests can inject scripted policies.
using RobotPolicy = std::function<EnvAction(const EnvState&, std::mt19937_64&)>;
Trajectory rollout_episode(const RobotPolicy& policy, const TaskConfig& task, std::int64_t episode_seed,
                           int round, Intervenor& intervenor);

struct DeployStats {
  int data_round = 0;
  int deployed_policy = 0;
  int episodes = 0;
  std::int64_t intv_samples = 0;
  std::int64_t preintv_samples = 0;
  std::int64_t samples = 0;
  int successes = 0;
  bool quota_reached = false;
  /// The episode cap was hit without a single intervention.
  bool quota_unreachable = false;
  WorkloadMetrics workload;
};

struct DeployResult {
  std::vector<Trajectory> trajectories;
  DeployStats stats;
};

/// Called for every relabelled trajectory before it enters the buffer;
/// returns where it was persisted.
using TrajectorySink = std::function<TrajectoryRef(const Trajectory&)>;

/// One deployment round: episodes until the cumulative intv count reaches
/// `quota` or `max_episodes` is hit. Every trajectory is relabelled and
/// inserted into `buffer`.
DeployResult deploy_round(const RobotPolicy& policy, MemoryBuffer& buffer, const RunConfig& config,
                          Intervenor& intervenor, std::int64_t quota, int data_round, int deployed_policy,
                          const TrajectorySink& sink = {});
DeployResult deploy_round(const PolicyParams& policy, MemoryBuffer& buffer, const RunConfig& config,
                          Intervenor& intervenor, std::int64_t quota, int data_round, int deployed_policy,
                          const TrajectorySink& sink = {});

struct BufferStats {
  std::size_t trajectories = 0;
  std::size_t counted = 0;
  ClassCounts counts{};
  std::int64_t retained_intv = 0;
};

/// Round i trains pi_{i+1} on D^i and, concurrently, deploys pi_i (pi_1 for
/// i = 0) to build D^{i+1}.
struct RoundRecord {
  int round = 0;
  int trained_policy = 0;
  std::size_t train_trajectories = 0;
  ClassCounts train_counts{};
  ClassDistribution p;
  ClassDistribution p_star;
  WeightTable weights;
  bool weighting_fell_back = false;
  double eval_success = 0.0;
  double eval_mean_len = 0.0;
  std::optional<double> top3_success;
  std::optional<int> convergence_epoch;
  DeployStats deployment;
  BufferStats buffer;
};

void to_json(nlohmann::json& j, const RoundRecord& r);
void from_json(const nlohmann::json& j, RoundRecord& r);

struct RunResult {
  std::vector<RoundRecord> records;
  /// policies[j-1] is pi_j.
  std::vector<PolicyParams> policies;
  std::vector<TrainingLog> train_logs;
  /// All collected trajectories per data round (index 0 = demos), before eviction.
  std::vector<std::vector<Trajectory>> rounds;
  /// train_sets[i] is the buffer snapshot pi_{i+1} was trained on.
  std::vector<Dataset> train_sets;
  MemoryBuffer buffer{MemoryConfig{}};
};

struct RunOptions {
  /// When set, the run directory is written here.
  std::optional<std::filesystem::path> out_dir;
  /// Intervenor for deployments; the scripted oracle when null.
  std::shared_ptr<Intervenor> intervenor;
  /// Stop after warmstart and the initial deployment (D^1).
  bool stop_after_initial_deployment = false;
};

/// Warmstart: M demos into the buffer and plain BC for pi_1.
TrainResult warmstart(const RunConfig& config, MemoryBuffer& buffer, std::vector<Trajectory>& demos);

/// The full deployment-learning loop.
RunResult run(const RunConfig& config, const RunOptions& options = {});

}  // namespace sirius
