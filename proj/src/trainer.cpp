#include "sirius/trainer.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "sirius/errors.hpp"

namespace sirius {

std::string_view to_string(Minibatch m) { return m == Minibatch::resample ? "resample" : "loss_weight"; }

Minibatch minibatch_from_string(std::string_view name) {
  if (name == "resample") return Minibatch::resample;
  if (name == "loss_weight") return Minibatch::loss_weight;
  throw ConfigError("train: unknown minibatch mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1 || steps_per_epoch < 1 || epochs < 0) {
    throw ConfigError("train: batch_size and steps_per_epoch must be positive, epochs >= 0");
  }
  if (!(adam.lr > 0.0) || !(adam.eps > 0.0)) throw ConfigError("train: lr and eps must be positive");
  if (eval_interval_epochs < 0 || eval_episodes < 1) {
    throw ConfigError("train: eval_interval_epochs >= 0 and eval_episodes >= 1 required");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"batch_size", c.batch_size},
                     {"steps_per_epoch", c.steps_per_epoch},
                     {"epochs", c.epochs},
                     {"lr", c.adam.lr},
                     {"beta1", c.adam.beta1},
                     {"beta2", c.adam.beta2},
                     {"eps", c.adam.eps},
                     {"eval_interval_epochs", c.eval_interval_epochs},
                     {"eval_episodes", c.eval_episodes},
                     {"seed", c.seed},
                     {"eval_seed", c.eval_seed},
                     {"minibatch", to_string(c.minibatch)}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.steps_per_epoch = j.value("steps_per_epoch", d.steps_per_epoch);
  c.epochs = j.value("epochs", d.epochs);
  c.adam.lr = j.value("lr", d.adam.lr);
  c.adam.beta1 = j.value("beta1", d.adam.beta1);
  c.adam.beta2 = j.value("beta2", d.adam.beta2);
  c.adam.eps = j.value("eps", d.adam.eps);
  c.eval_interval_epochs = j.value("eval_interval_epochs", d.eval_interval_epochs);
  c.eval_episodes = j.value("eval_episodes", d.eval_episodes);
  c.seed = j.value("seed", d.seed);
  c.eval_seed = j.value("eval_seed", d.eval_seed);
  c.minibatch = minibatch_from_string(j.value("minibatch", std::string(to_string(d.minibatch))));
}

void write_training_log(const std::filesystem::path& path, const TrainingLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,mean_loss,eval_success,wall_ms\n";
  for (const auto& r : log) {
    out << fmt::format("{},{:.17g},{},{:.3f}\n", r.epoch, r.mean_loss,
                       r.eval_success ? fmt::format("{:.17g}", *r.eval_success) : std::string(), r.wall_ms);
  }
}

TrainingLog read_training_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  TrainingLog log;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string epoch, loss, eval, wall;
    std::getline(ss, epoch, ',');
    std::getline(ss, loss, ',');
    std::getline(ss, eval, ',');
    std::getline(ss, wall, ',');
    EpochRecord r;
    try {
      r.epoch = std::stoi(epoch);
      r.mean_loss = std::stod(loss);
      if (!eval.empty()) r.eval_success = std::stod(eval);
      if (!wall.empty()) r.wall_ms = std::stod(wall);
    } catch (const std::exception&) {
      throw FormatError("malformed training log line: " + line);
    }
    log.push_back(r);
  }
  return log;
}

TrainResult class_weights_for(const Dataset& dataset, const WeightingScheme& scheme) {
  TrainResult r;
  r.p = class_distribution(dataset);
  try {
    r.p_star = target_distribution(r.p, scheme);
  } catch (const MissingClass& e) {
    spdlog::warn("weighting '{}' falls back to unweighted: {}", to_string(scheme.kind), e.what());
    r.p_star = r.p;
    r.fell_back_to_unweighted = true;
  }
  r.weights = weight_table(r.p, r.p_star);
  return r;
}

TrainResult train(const Dataset& dataset, const WeightingScheme& scheme, const PolicyArch& arch,
                  const TrainConfig& config, const TaskConfig& eval_task) {
  config.validate();
  if (dataset.sample_count() == 0) throw EmptyDataset();
  TrainResult result = class_weights_for(dataset, scheme);

  std::vector<WeightedSample> samples;
  samples.reserve(dataset.sample_count());
  for (const Trajectory& t : dataset.trajectories) {
    for (const Sample& s : t.samples()) samples.push_back({s.state, s.action, result.weights[s.label]});
  }

  PolicyParams params = init_params(arch, static_cast<std::uint64_t>(config.seed));
  result.best = params;
  Adam adam(params.theta.size(), config.adam);
  std::seed_seq seq{static_cast<std::uint64_t>(config.seed), std::uint64_t{0x6d696e69}};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::size_t> uniform(0, samples.size() - 1);
  std::discrete_distribution<std::size_t> proportional;
  if (config.minibatch == Minibatch::resample) {
    std::vector<double> w(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) w[i] = samples[i].weight;
    proportional = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    for (auto& s : samples) s.weight = 1.0;
  }
  auto pick = [&] { return config.minibatch == Minibatch::resample ? proportional(rng) : uniform(rng); };

  std::vector<WeightedSample> batch(static_cast<std::size_t>(config.batch_size));
  std::vector<std::size_t> indices(batch.size());
  double best_success = -1.0;
  bool evaluated = false;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    for (int s = 0; s < config.steps_per_epoch; ++s) {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        indices[i] = pick();
        batch[i] = samples[indices[i]];
      }
      LossAndGrad lg = weighted_nll_and_grad(params, batch);
      if (!std::isfinite(lg.loss)) {
        std::string which;
        for (std::size_t i : indices) which += fmt::format("{} ", i);
        spdlog::error("non-finite loss at epoch {} step {}; batch sample indices: {}", epoch, s, which);
        throw NonFiniteLoss(fmt::format("non-finite loss at epoch {} step {}", epoch, s));
      }
      loss_sum += lg.loss;
      adam.step(params.theta, lg.grad);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / config.steps_per_epoch;
    if (config.eval_interval_epochs > 0 && epoch % config.eval_interval_epochs == 0) {
      const EvalReport report = evaluate(params, eval_task, config.eval_episodes, config.eval_seed);
      rec.eval_success = report.success_rate;
      evaluated = true;
      if (report.success_rate > best_success) {
        best_success = report.success_rate;
        result.best = params;
      }
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
  }
  if (!evaluated) result.best = params;
  return result;
}

EvalReport evaluate(const ActionFn& policy, const TaskConfig& task, int n_episodes, std::int64_t seed) {
  if (n_episodes < 1) throw Error("evaluate: n_episodes must be >= 1");
  int successes = 0;
  double total_len = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    EnvState s = reset(task, seed + e);
    bool success = false;
    while (!s.done) {
      const StepResult r = step(task, s, policy(s));
      success = r.success;
      s = r.state;
    }
    successes += success ? 1 : 0;
    total_len += s.t;
  }
  return {static_cast<double>(successes) / n_episodes, total_len / n_episodes};
}

EvalReport evaluate(const PolicyParams& params, const TaskConfig& task, int n_episodes, std::int64_t seed) {
  std::mt19937_64 unused(0);
  return evaluate(
      [&](const EnvState& s) {
        return EnvAction::from_vector(sample_action(params, observation(s), unused, true));
      },
      task, n_episodes, seed);
}

double top_k_checkpoint_average(const TrainingLog& log, int k) {
  std::vector<double> evals;
  for (const auto& r : log) {
    if (r.eval_success) evals.push_back(*r.eval_success);
  }
  if (k < 1 || static_cast<int>(evals.size()) < k) {
    throw InsufficientCheckpoints(fmt::format("need {} evaluated checkpoints, have {}", k, evals.size()));
  }
  std::partial_sort(evals.begin(), evals.begin() + k, evals.end(), std::greater<>());
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += evals[i];
  return sum / k;
}

}  // namespace sirius
