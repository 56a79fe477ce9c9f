#include "sirius/metrics_report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <regex>

#include "sirius/errors.hpp"
#include "sirius/trajectory_io.hpp"

namespace sirius {

void to_json(nlohmann::json& j, const WorkloadMetrics& m) {
  j = nlohmann::json{{"intv_sample_ratio", m.intv_sample_ratio},
                     {"intv_frequency", m.intv_frequency},
                     {"mean_intv_length", m.mean_intv_length},
                     {"no_segments", m.no_segments},
                     {"n_rollouts", m.n_rollouts}};
}

void from_json(const nlohmann::json& j, WorkloadMetrics& m) {
  m.intv_sample_ratio = j.at("intv_sample_ratio").get<double>();
  m.intv_frequency = j.at("intv_frequency").get<double>();
  m.mean_intv_length = j.at("mean_intv_length").get<double>();
  m.no_segments = j.at("no_segments").get<bool>();
  m.n_rollouts = j.at("n_rollouts").get<std::int64_t>();
}

double intervention_sample_ratio(std::span<const Trajectory> round) {
  std::int64_t intv = 0;
  std::int64_t total = 0;
  for (const Trajectory& t : round) {
    intv += intervention_count(t);
    total += static_cast<std::int64_t>(t.size());
  }
  if (total == 0) throw EmptyRound();
  return static_cast<double>(intv) / static_cast<double>(total);
}

double intervention_frequency(std::span<const Trajectory> round) {
  if (round.empty()) throw EmptyRound();
  std::size_t segments = 0;
  for (const Trajectory& t : round) segments += intervention_segments(t).size();
  return static_cast<double>(segments) / static_cast<double>(round.size());
}

MeanLength mean_intervention_length(std::span<const Trajectory> round) {
  std::size_t n = 0;
  std::size_t total = 0;
  for (const Trajectory& t : round) {
    for (const Segment& s : intervention_segments(t)) {
      total += s.end - s.start;
      ++n;
    }
  }
  if (n == 0) return {};
  return {static_cast<double>(total) / static_cast<double>(n), false};
}

WorkloadMetrics workload_metrics(std::span<const Trajectory> round) {
  WorkloadMetrics m;
  m.intv_sample_ratio = intervention_sample_ratio(round);
  m.intv_frequency = intervention_frequency(round);
  const MeanLength len = mean_intervention_length(round);
  m.mean_intv_length = len.value;
  m.no_segments = len.empty;
  m.n_rollouts = static_cast<std::int64_t>(round.size());
  return m;
}

std::optional<int> convergence_epochs(const TrainingLog& log, double target) {
  for (const EpochRecord& r : log) {
    if (r.eval_success && *r.eval_success >= target) return r.epoch;
  }
  return std::nullopt;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

namespace {

nlohmann::json read_records(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "records.json";
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::filesystem::path> files_matching(const std::filesystem::path& dir, const std::regex& re) {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (std::regex_match(entry.path().filename().string(), re)) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

AggregateReport aggregate(std::span<const std::filesystem::path> run_dirs) {
  if (run_dirs.empty()) throw Error("aggregate: no run directories");
  std::vector<nlohmann::json> runs;
  for (const auto& dir : run_dirs) runs.push_back(read_records(dir));
  const std::size_t n_rounds = runs.front().size();
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].size() != n_rounds) {
      throw MismatchedConfigs(fmt::format("{} has {} rounds, {} has {}", run_dirs[0].string(), n_rounds,
                                          run_dirs[r].string(), runs[r].size()));
    }
  }

  AggregateReport report;
  for (std::size_t i = 0; i < n_rounds; ++i) {
    std::vector<double> success, top3, ratio, freq, len, episodes;
    int round = 0;
    for (const auto& run : runs) {
      const auto& rec = run.at(i);
      round = rec.at("round").get<int>();
      success.push_back(rec.at("eval_success").get<double>());
      if (!rec.at("top3_success").is_null()) top3.push_back(rec.at("top3_success").get<double>());
      const auto& dep = rec.at("deployment");
      const WorkloadMetrics w = dep.at("workload").get<WorkloadMetrics>();
      ratio.push_back(w.intv_sample_ratio);
      freq.push_back(w.intv_frequency);
      len.push_back(w.mean_intv_length);
      episodes.push_back(dep.at("episodes").get<double>());
    }
    RoundAggregate a;
    a.round = round;
    a.n_runs = static_cast<int>(runs.size());
    a.success = mean_std(success);
    a.top3_success = mean_std(top3);
    a.intv_ratio = mean_std(ratio);
    a.intv_frequency = mean_std(freq);
    a.intv_length = mean_std(len);
    a.episodes = mean_std(episodes);
    report.rounds.push_back(a);
  }
  return report;
}

AggregateReport write_aggregate_report(std::span<const std::filesystem::path> run_dirs,
                                       const std::filesystem::path& out_dir) {
  AggregateReport report = aggregate(run_dirs);
  std::filesystem::create_directories(out_dir);

  std::ofstream csv(out_dir / "report.csv", std::ios::binary | std::ios::trunc);
  csv << "round,n_runs,success_mean,success_std,top3_mean,top3_std,intv_ratio_mean,intv_ratio_std,"
         "intv_frequency_mean,intv_frequency_std,intv_length_mean,intv_length_std,episodes_mean,episodes_std\n";
  for (const RoundAggregate& a : report.rounds) {
    csv << fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.3f},{:.3f}\n",
                       a.round, a.n_runs, a.success.mean, a.success.std, a.top3_success.mean,
                       a.top3_success.std, a.intv_ratio.mean, a.intv_ratio.std, a.intv_frequency.mean,
                       a.intv_frequency.std, a.intv_length.mean, a.intv_length.std, a.episodes.mean,
                       a.episodes.std);
  }

  std::ofstream timeline(out_dir / "timeline.csv", std::ios::binary | std::ios::trunc);
  timeline << "run,round,rollout_id,t,owner\n";
  const std::regex round_file(R"(round_(\d+)\.jsonl)");
  for (std::size_t r = 0; r < run_dirs.size(); ++r) {
    for (const auto& file : files_matching(run_dirs[r], round_file)) {
      const int round = std::stoi(file.stem().string().substr(6));
      if (round == 0) continue;
      const auto trajectories = read_trajectory_file(file);
      for (std::size_t id = 0; id < trajectories.size(); ++id) {
        for (const Sample& s : trajectories[id].samples()) {
          timeline << r << ',' << round << ',' << id << ',' << s.t << ','
                   << (s.label == ClassLabel::intv ? "human" : "robot") << '\n';
        }
      }
    }
  }

  std::ofstream conv(out_dir / "convergence.csv", std::ios::binary | std::ios::trunc);
  conv << "run,policy,convergence_epoch\n";
  const std::regex log_file(R"(train_policy_(\d+)\.csv)");
  for (std::size_t r = 0; r < run_dirs.size(); ++r) {
    std::vector<std::pair<int, std::filesystem::path>> logs;
    for (const auto& file : files_matching(run_dirs[r], log_file)) {
      logs.emplace_back(std::stoi(file.stem().string().substr(13)), file);
    }
    std::sort(logs.begin(), logs.end());
    for (const auto& [policy, file] : logs) {
      const auto epoch = convergence_epochs(read_training_log(file));
      conv << r << ',' << policy << ',' << (epoch ? std::to_string(*epoch) : std::string()) << '\n';
    }
  }
  return report;
}

}  // namespace sirius
