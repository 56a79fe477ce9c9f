#include "sirius/deployment_loop.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <future>

#include "sirius/errors.hpp"
#include "sirius/trajectory_io.hpp"

namespace sirius {

namespace {

enum Stream : std::int64_t {
  kDemoStream = 1,
  kDeployStream = 2,
  kTrainStream = 3,
  kMemoryStream = 4,
  kPolicyNoiseStream = 5,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string round_file(int round) { return fmt::format("round_{:03d}.jsonl", round); }

nlohmann::json counts_json(const ClassCounts& c) {
  nlohmann::json j;
  for (ClassLabel l : kAllClasses) j[std::string(to_string(l))] = c[index_of(l)];
  return j;
}

ClassCounts counts_from_json(const nlohmann::json& j) {
  ClassCounts c{};
  for (ClassLabel l : kAllClasses) c[index_of(l)] = j.at(std::string(to_string(l))).get<std::int64_t>();
  return c;
}

template <class Array>
nlohmann::json per_class_json(const Array& a) {
  nlohmann::json j;
  for (ClassLabel l : kAllClasses) j[std::string(to_string(l))] = a[index_of(l)];
  return j;
}

template <class Array>
void per_class_from_json(const nlohmann::json& j, Array& a) {
  for (ClassLabel l : kAllClasses) a[index_of(l)] = j.at(std::string(to_string(l))).get<double>();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

BufferStats buffer_stats(const MemoryBuffer& buffer) {
  BufferStats s;
  s.trajectories = buffer.size();
  s.counted = buffer.counted_size();
  for (const auto& e : buffer.entries()) {
    const ClassCounts c = class_counts(e.trajectory);
    for (std::size_t k = 0; k < c.size(); ++k) s.counts[k] += c[k];
  }
  s.retained_intv = buffer.retained_intv_samples();
  return s;
}

RobotPolicy robot_policy(const PolicyParams& params, bool deterministic = false) {
  return [&params, deterministic](const EnvState& s, std::mt19937_64& rng) {
    return EnvAction::from_vector(sample_action(params, observation(s), rng, deterministic));
  };
}

}  // namespace

void RunConfig::validate() const {
  task.validate();
  oracle.validate();
  labeling.validate();
  weighting.validate();
  arch.validate();
  train.validate();
  if (demos < 1) throw ConfigError("run.demos must be >= 1");
  if (rounds < 0) throw ConfigError("run.rounds must be >= 0");
  if (max_episodes_per_round < 1) throw ConfigError("run.max_episodes_per_round must be >= 1");
  if (arch.input_dim != kObservationDim || arch.action_dim != kActionDim) {
    throw ConfigError(fmt::format("arch must map {} observations to {} actions", kObservationDim, kActionDim));
  }
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"task", c.task},
                     {"oracle", c.oracle},
                     {"labeling", c.labeling},
                     {"weighting", c.weighting},
                     {"arch", c.arch},
                     {"train", c.train},
                     {"memory", c.memory},
                     {"run",
                      {{"demos", c.demos},
                       {"rounds", c.rounds},
                       {"max_episodes_per_round", c.max_episodes_per_round},
                       {"parallel", c.parallel},
                       {"sample_rollouts", c.sample_rollouts},
                       {"seed", c.seed}}}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  c = RunConfig{};
  if (j.contains("task")) c.task = j.at("task").get<TaskConfig>();
  if (j.contains("oracle")) c.oracle = j.at("oracle").get<InterventionModel>();
  if (j.contains("labeling")) c.labeling = j.at("labeling").get<LabelingConfig>();
  if (j.contains("weighting")) c.weighting = j.at("weighting").get<WeightingScheme>();
  if (j.contains("arch")) c.arch = j.at("arch").get<PolicyArch>();
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
  if (j.contains("memory")) c.memory = j.at("memory").get<MemoryConfig>();
  if (j.contains("run")) {
    const auto& r = j.at("run");
    c.demos = r.value("demos", c.demos);
    c.rounds = r.value("rounds", c.rounds);
    c.max_episodes_per_round = r.value("max_episodes_per_round", c.max_episodes_per_round);
    c.parallel = r.value("parallel", c.parallel);
    c.sample_rollouts = r.value("sample_rollouts", c.sample_rollouts);
    c.seed = r.value("seed", c.seed);
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.contains("task_file") && !j.contains("task")) {
      const auto task_path = path.parent_path() / j.at("task_file").get<std::string>();
      std::ifstream tin(task_path);
      if (!tin) throw ConfigError("cannot read task file " + task_path.string());
      j["task"] = nlohmann::json::parse(tin);
    }
    RunConfig c = j.get<RunConfig>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::int64_t intervention_quota(std::int64_t demo_samples) {
  return std::max<std::int64_t>(1, (demo_samples + 2) / 3);
}

std::int64_t derive_seed(std::int64_t run_seed, std::int64_t stream, std::int64_t index) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(run_seed));
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ static_cast<std::uint64_t>(index));
  return static_cast<std::int64_t>(h >> 2);
}

std::int64_t policy_train_seed(const RunConfig& config, int policy_index) {
  return derive_seed(config.seed, kTrainStream, policy_index);
}

std::uint64_t buffer_seed(const RunConfig& config) {
  return static_cast<std::uint64_t>(derive_seed(config.seed, kMemoryStream));
}

ScriptedIntervenor::ScriptedIntervenor(TaskConfig task, InterventionModel model)
    : task_(std::move(task)), model_(model), history_(model.stall_window) {}

void ScriptedIntervenor::begin_episode(const EnvState& initial, std::int64_t, int) {
  history_.reset(initial);
  owner_ = ControlOwner{};
}

Arbitration ScriptedIntervenor::decide(const EnvState& state, const EnvAction& robot_action) {
  const bool alarm = monitor(history_.states(), owner_, task_, model_);
  Arbitration arb = arbitrate(owner_, alarm, state, robot_action, model_, task_);
  owner_ = arb.owner;
  return arb;
}

void ScriptedIntervenor::observe(const StepResult& result) { history_.push(result.state); }

Trajectory rollout_episode(const RobotPolicy& policy, const TaskConfig& task, std::int64_t episode_seed,
                           int round, Intervenor& intervenor) {
  EnvState s = reset(task, episode_seed);
  std::mt19937_64 rng(splitmix64(static_cast<std::uint64_t>(episode_seed) ^ kPolicyNoiseStream));
  intervenor.begin_episode(s, episode_seed, round);
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(task.horizon));
  bool success = false;
  while (!s.done) {
    const EnvAction robot = policy(s, rng).clamped();
    const Arbitration arb = intervenor.decide(s, robot);
    const EnvAction action = arb.action.clamped();
    const StepResult r = step(task, s, action);
    samples.push_back({observation(s), action.to_vector(), r.reward, arb.label, s.t});
    intervenor.observe(r);
    success = r.success;
    s = r.state;
  }
  Trajectory traj(std::move(samples), {round, episode_seed, success, intervenor.source()});
  intervenor.end_episode(traj);
  return traj;
}

Trajectory rollout_episode(const PolicyParams& policy, const TaskConfig& task, std::int64_t episode_seed,
                           int round, Intervenor& intervenor) {
  return rollout_episode(robot_policy(policy), task, episode_seed, round, intervenor);
}

DeployResult deploy_round(const RobotPolicy& policy, MemoryBuffer& buffer, const RunConfig& config,
                          Intervenor& intervenor, std::int64_t quota, int data_round, int deployed_policy,
                          const TrajectorySink& sink) {
  DeployResult out;
  DeployStats& st = out.stats;
  st.data_round = data_round;
  st.deployed_policy = deployed_policy;
  while (st.episodes < config.max_episodes_per_round && st.intv_samples < quota) {
    const std::int64_t seed = derive_seed(config.seed, kDeployStream * 1000 + data_round, st.episodes);
    Trajectory traj = relabel_preintv(rollout_episode(policy, config.task, seed, data_round, intervenor),
                                      config.labeling);
    const ClassCounts c = class_counts(traj);
    st.intv_samples += c[index_of(ClassLabel::intv)];
    st.preintv_samples += c[index_of(ClassLabel::preintv)];
    st.samples += static_cast<std::int64_t>(traj.size());
    st.successes += traj.provenance().success ? 1 : 0;
    ++st.episodes;
    TrajectoryRef ref = sink ? sink(traj) : TrajectoryRef{};
    buffer.insert(traj, std::move(ref));
    out.trajectories.push_back(std::move(traj));
  }
  st.quota_reached = st.intv_samples >= quota;
  st.quota_unreachable = st.intv_samples == 0;
  if (st.quota_unreachable) {
    spdlog::warn("round {}: {} episodes without a single intervention; quota {} unreachable", data_round,
                 st.episodes, quota);
  }
  st.workload = workload_metrics(out.trajectories);
  return out;
}

DeployResult deploy_round(const PolicyParams& policy, MemoryBuffer& buffer, const RunConfig& config,
                          Intervenor& intervenor, std::int64_t quota, int data_round, int deployed_policy,
                          const TrajectorySink& sink) {
  return deploy_round(robot_policy(policy, !config.sample_rollouts), buffer, config, intervenor, quota, data_round,
                      deployed_policy, sink);
}

void to_json(nlohmann::json& j, const RoundRecord& r) {
  const auto& d = r.deployment;
  j = nlohmann::json{
      {"round", r.round},
      {"trained_policy", r.trained_policy},
      {"train_trajectories", r.train_trajectories},
      {"train_counts", counts_json(r.train_counts)},
      {"p", per_class_json(r.p.p)},
      {"p_star", per_class_json(r.p_star.p)},
      {"weights", per_class_json(r.weights.w)},
      {"weighting_fell_back", r.weighting_fell_back},
      {"eval_success", r.eval_success},
      {"eval_mean_len", r.eval_mean_len},
      {"top3_success", r.top3_success ? nlohmann::json(*r.top3_success) : nlohmann::json()},
      {"convergence_epoch", r.convergence_epoch ? nlohmann::json(*r.convergence_epoch) : nlohmann::json()},
      {"deployment",
       {{"data_round", d.data_round},
        {"deployed_policy", d.deployed_policy},
        {"episodes", d.episodes},
        {"intv_samples", d.intv_samples},
        {"preintv_samples", d.preintv_samples},
        {"samples", d.samples},
        {"successes", d.successes},
        {"quota_reached", d.quota_reached},
        {"quota_unreachable", d.quota_unreachable},
        {"workload", d.workload}}},
      {"buffer",
       {{"trajectories", r.buffer.trajectories},
        {"counted", r.buffer.counted},
        {"counts", counts_json(r.buffer.counts)},
        {"retained_intv", r.buffer.retained_intv}}}};
}

void from_json(const nlohmann::json& j, RoundRecord& r) {
  r.round = j.at("round").get<int>();
  r.trained_policy = j.at("trained_policy").get<int>();
  r.train_trajectories = j.at("train_trajectories").get<std::size_t>();
  r.train_counts = counts_from_json(j.at("train_counts"));
  per_class_from_json(j.at("p"), r.p.p);
  per_class_from_json(j.at("p_star"), r.p_star.p);
  per_class_from_json(j.at("weights"), r.weights.w);
  r.weighting_fell_back = j.at("weighting_fell_back").get<bool>();
  r.eval_success = j.at("eval_success").get<double>();
  r.eval_mean_len = j.at("eval_mean_len").get<double>();
  r.top3_success.reset();
  if (!j.at("top3_success").is_null()) r.top3_success = j.at("top3_success").get<double>();
  r.convergence_epoch.reset();
  if (!j.at("convergence_epoch").is_null()) r.convergence_epoch = j.at("convergence_epoch").get<int>();
  const auto& d = j.at("deployment");
  r.deployment.data_round = d.at("data_round").get<int>();
  r.deployment.deployed_policy = d.at("deployed_policy").get<int>();
  r.deployment.episodes = d.at("episodes").get<int>();
  r.deployment.intv_samples = d.at("intv_samples").get<std::int64_t>();
  r.deployment.preintv_samples = d.at("preintv_samples").get<std::int64_t>();
  r.deployment.samples = d.at("samples").get<std::int64_t>();
  r.deployment.successes = d.at("successes").get<int>();
  r.deployment.quota_reached = d.at("quota_reached").get<bool>();
  r.deployment.quota_unreachable = d.at("quota_unreachable").get<bool>();
  r.deployment.workload = d.at("workload").get<WorkloadMetrics>();
  const auto& b = j.at("buffer");
  r.buffer.trajectories = b.at("trajectories").get<std::size_t>();
  r.buffer.counted = b.at("counted").get<std::size_t>();
  r.buffer.counts = counts_from_json(b.at("counts"));
  r.buffer.retained_intv = b.at("retained_intv").get<std::int64_t>();
}

TrainResult warmstart(const RunConfig& config, MemoryBuffer& buffer, std::vector<Trajectory>& demos) {
  for (int k = 0; k < config.demos; ++k) {
    demos.push_back(generate_demo(config.task, derive_seed(config.seed, kDemoStream, k)));
    buffer.insert(demos.back(), {round_file(0), static_cast<std::size_t>(k)});
  }
  TrainConfig tc = config.train;
  tc.seed = policy_train_seed(config, 1);
  WeightingScheme plain;
  plain.kind = SchemeKind::unweighted;
  return train(buffer.snapshot(config.task.task_id), plain, config.arch, tc, config.task);
}

namespace {

RoundRecord make_record(int round, int trained_policy, const Dataset& train_set, const TrainResult& tr,
                        const RunConfig& config) {
  RoundRecord rec;
  rec.round = round;
  rec.trained_policy = trained_policy;
  rec.train_trajectories = train_set.trajectories.size();
  rec.train_counts = class_counts(train_set);
  rec.p = tr.p;
  rec.p_star = tr.p_star;
  rec.weights = tr.weights;
  rec.weighting_fell_back = tr.fell_back_to_unweighted;
  const EvalReport ev = evaluate(tr.best, config.task, config.train.eval_episodes, config.train.eval_seed);
  rec.eval_success = ev.success_rate;
  rec.eval_mean_len = ev.mean_episode_len;
  try {
    rec.top3_success = top_k_checkpoint_average(tr.log, 3);
  } catch (const InsufficientCheckpoints&) {
  }
  rec.convergence_epoch = convergence_epochs(tr.log);
  return rec;
}

void write_round_outputs(const std::filesystem::path& dir, const RunResult& result, const RunConfig& config) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : result.records) records.push_back(r);
  write_text(dir / "records.json", records.dump(2) + "\n");
  write_text(dir / "buffer_manifest.json", result.buffer.manifest().dump(2) + "\n");

  DatasetManifest manifest{config.task.task_id, {}};
  for (std::size_t k = 0; k < result.rounds.size(); ++k) {
    if (!result.rounds[k].empty()) manifest.files.push_back(round_file(static_cast<int>(k)));
  }
  write_manifest(dir, manifest);

  std::string csv =
      "round,trained_policy,eval_success,top3_success,data_round,deployed_policy,episodes,intv_samples,"
      "preintv_samples,samples,team_success,intv_sample_ratio,intv_frequency,mean_intv_length\n";
  for (const auto& r : result.records) {
    const auto& d = r.deployment;
    csv += fmt::format("{},{},{:.6f},{},{},{},{},{},{},{},{},{:.6f},{:.6f},{:.6f}\n", r.round, r.trained_policy,
                       r.eval_success, r.top3_success ? fmt::format("{:.6f}", *r.top3_success) : std::string(),
                       d.data_round, d.deployed_policy, d.episodes, d.intv_samples, d.preintv_samples, d.samples,
                       d.successes, d.workload.intv_sample_ratio, d.workload.intv_frequency,
                       d.workload.mean_intv_length);
  }
  write_text(dir / "metrics.csv", csv);
}

}  // namespace

RunResult run(const RunConfig& config, const RunOptions& options) {
  config.validate();
  const auto& out_dir = options.out_dir;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    for (const auto& entry : std::filesystem::directory_iterator(*out_dir)) {
      if (entry.path().extension() == ".jsonl") std::filesystem::remove(entry.path());
    }
    write_text(*out_dir / "config.json", nlohmann::json(config).dump(2) + "\n");
  }

  MemoryConfig mc = config.memory;
  mc.rng_seed = buffer_seed(config);
  RunResult result;
  result.buffer = MemoryBuffer(mc);
  std::shared_ptr<Intervenor> intervenor =
      options.intervenor ? options.intervenor : std::make_shared<ScriptedIntervenor>(config.task, config.oracle);

  auto sink_for = [&](int data_round) -> TrajectorySink {
    if (!out_dir) return {};
    auto index = std::make_shared<std::size_t>(0);
    return [&, data_round, index](const Trajectory& t) {
      append_trajectory(*out_dir / round_file(data_round), t, config.task.task_id);
      return TrajectoryRef{round_file(data_round), (*index)++};
    };
  };
  auto save_policy = [&](int j, const TrainResult& tr) {
    if (!out_dir) return;
    save_checkpoint(*out_dir / fmt::format("policy_{}.ckpt", j), tr.best);
    write_training_log(*out_dir / fmt::format("train_policy_{}.csv", j), tr.log);
  };

  // Round 0: warmstart, then pi_1 collects D^1.
  try {
    std::vector<Trajectory> demos;
    Dataset d0;
    TrainResult tr = warmstart(config, result.buffer, demos);
    d0 = result.buffer.snapshot(config.task.task_id);
    if (out_dir) {
      for (const auto& t : demos) append_trajectory(*out_dir / round_file(0), t, config.task.task_id);
    }
    std::int64_t demo_samples = 0;
    for (const auto& t : demos) demo_samples += static_cast<std::int64_t>(t.size());
    result.rounds.push_back(std::move(demos));
    result.policies.push_back(tr.best);
    result.train_logs.push_back(tr.log);
    result.train_sets.push_back(d0);
    save_policy(1, tr);
    RoundRecord rec = make_record(0, 1, d0, tr, config);
    if (config.rounds >= 1) {
      DeployResult dep = deploy_round(result.policies[0], result.buffer, config, *intervenor,
                                      intervention_quota(demo_samples), 1, 1, sink_for(1));
      rec.deployment = dep.stats;
      result.rounds.push_back(std::move(dep.trajectories));
    }
    rec.buffer = buffer_stats(result.buffer);
    result.records.push_back(rec);
    if (out_dir) write_round_outputs(*out_dir, result, config);
    if (options.stop_after_initial_deployment) return result;

    for (int i = 1; i <= config.rounds; ++i) {
      try {
        const Dataset snapshot = result.buffer.snapshot(config.task.task_id);
        TrainConfig tc = config.train;
        tc.seed = policy_train_seed(config, i + 1);
        auto learn = [&config, &snapshot, tc] {
          return train(snapshot, config.weighting, config.arch, tc, config.task);
        };
        TrainResult learned;
        DeployResult dep;
        const PolicyParams& deployed = result.policies[static_cast<std::size_t>(i - 1)];
        if (config.parallel) {
          auto future = std::async(std::launch::async, learn);
          dep = deploy_round(deployed, result.buffer, config, *intervenor, intervention_quota(demo_samples), i + 1,
                             i, sink_for(i + 1));
          learned = future.get();
        } else {
          learned = learn();
          dep = deploy_round(deployed, result.buffer, config, *intervenor, intervention_quota(demo_samples), i + 1,
                             i, sink_for(i + 1));
        }
        result.policies.push_back(learned.best);
        result.train_logs.push_back(learned.log);
        result.train_sets.push_back(snapshot);
        save_policy(i + 1, learned);
        RoundRecord r = make_record(i, i + 1, snapshot, learned, config);
        r.deployment = dep.stats;
        r.buffer = buffer_stats(result.buffer);
        result.rounds.push_back(std::move(dep.trajectories));
        result.records.push_back(r);
        if (out_dir) write_round_outputs(*out_dir, result, config);
        spdlog::info("round {}: pi_{} eval success {:.3f}; D^{} has {} episodes, intv ratio {:.3f}", i, i + 1,
                     r.eval_success, i + 1, r.deployment.episodes, r.deployment.workload.intv_sample_ratio);
      } catch (const RoundAborted&) {
        throw;
      } catch (const Error& e) {
        throw RoundAborted(i, e.what());
      }
    }
  } catch (const RoundAborted&) {
    throw;
  } catch (const Error& e) {
    throw RoundAborted(0, e.what());
  }
  return result;
}

}  // namespace sirius
