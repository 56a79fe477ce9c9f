#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sirius/adam.hpp"
#include "sirius/core_data.hpp"
#include "sirius/env2d.hpp"
#include "sirius/policy_gmm.hpp"
#include "sirius/weighting.hpp"

namespace sirius {

/// How class weights enter a minibatch. Both give the same expected gradient.
enum class Minibatch {
  /// Draw samples with probability proportional to their weight; unit loss weights.
  resample,
  /// Draw samples uniformly and scale each loss term by its weight.
  loss_weight,
};

std::string_view to_string(Minibatch m);
Minibatch minibatch_from_string(std::string_view name);

struct TrainConfig {
  int batch_size = 16;
  int steps_per_epoch = 500;
  int epochs = 50;
  AdamConfig adam;
  int eval_interval_epochs = 5;
  int eval_episodes = 20;
  std::int64_t seed = 0;
  /// First episode seed of the evaluation set.
  std::int64_t eval_seed = 1'000'000;
  Minibatch minibatch = Minibatch::resample;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> eval_success;
  double wall_ms = 0.0;
};

using TrainingLog = std::vector<EpochRecord>;

/// CSV with columns epoch,mean_loss,eval_success,wall_ms.
void write_training_log(const std::filesystem::path& path, const TrainingLog& log);
TrainingLog read_training_log(const std::filesystem::path& path);

struct TrainResult {
  PolicyParams best;
  TrainingLog log;
  ClassDistribution p;
  ClassDistribution p_star;
  WeightTable weights;
  /// Set when the scheme asked for an absent class and plain BC was used.
  bool fell_back_to_unweighted = false;
};

/// P(c), P*(c) and the weight table the trainer would use for `dataset`.
/// Falls back to P* = P (with a warning) on MissingClass.
TrainResult class_weights_for(const Dataset& dataset, const WeightingScheme& scheme);

/// Weighted behavioural cloning with Adam. Minibatches are drawn uniformly
/// over samples; class weights enter through the loss. Returns the
/// checkpoint with the best evaluation success (earliest on ties), or the
/// final parameters when no evaluation ran.
TrainResult train(const Dataset& dataset, const WeightingScheme& scheme, const PolicyArch& arch,
                  const TrainConfig& config, const TaskConfig& eval_task);

struct EvalReport {
  double success_rate = 0.0;
  double mean_episode_len = 0.0;
};

using ActionFn = std::function<EnvAction(const EnvState&)>;

/// Rollouts on episode seeds seed .. seed+n-1.
EvalReport evaluate(const ActionFn& policy, const TaskConfig& task, int n_episodes, std::int64_t seed);
/// Deterministic (mode-mean) actions.
EvalReport evaluate(const PolicyParams& params, const TaskConfig& task, int n_episodes, std::int64_t seed);

/// Mean of the k highest evaluation success rates in `log`.
double top_k_checkpoint_average(const TrainingLog& log, int k = 3);

}  // namespace sirius
