#include "sirius/trajectory_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "sirius/errors.hpp"

namespace sirius {

namespace {

// Integral values get a ".0" so the parser keeps them as doubles (and -0.0 keeps its sign).
void append_float(std::string& line, double v) {
  const std::size_t start = line.size();
  fmt::format_to(std::back_inserter(line), "{:.17g}", v);
  if (line.find_first_of(".en", start) == std::string::npos) line += ".0";
}

void append_floats(std::string& line, const std::vector<double>& values) {
  line += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    append_float(line, values[i]);
  }
  line += ']';
}

std::string quoted(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

}  // namespace

void write_trajectory(std::ostream& out, const Trajectory& trajectory, std::string_view task_id) {
  const auto& p = trajectory.provenance();
  out << fmt::format(R"({{"traj":{{"round":{},"seed":{},"success":{},"source":{},"task_id":{},"len":{}}}}})",
                     p.round, p.seed, p.success ? "true" : "false", quoted(to_string(p.source)),
                     quoted(task_id), trajectory.size())
      << '\n';
  std::string line;
  for (const Sample& s : trajectory.samples()) {
    line.clear();
    fmt::format_to(std::back_inserter(line), R"({{"t":{},"s":)", s.t);
    append_floats(line, s.state);
    line += R"(,"a":)";
    append_floats(line, s.action);
    line += R"(,"r":)";
    append_float(line, s.reward);
    fmt::format_to(std::back_inserter(line), R"(,"c":"{}"}})", to_string(s.label));
    out << line << '\n';
  }
}

std::vector<Trajectory> read_trajectories(std::istream& in, std::string* task_id) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty()) return true;
    }
    return false;
  };
  try {
    while (next_line()) {
      const auto header = nlohmann::json::parse(line).at("traj");
      Trajectory::Provenance prov;
      prov.round = header.at("round").get<std::int64_t>();
      prov.seed = header.at("seed").get<std::int64_t>();
      prov.success = header.at("success").get<bool>();
      prov.source = trajectory_source_from_string(header.at("source").get<std::string>());
      if (task_id) *task_id = header.at("task_id").get<std::string>();
      const auto len = header.at("len").get<std::size_t>();
      std::vector<Sample> samples;
      samples.reserve(len);
      for (std::size_t i = 0; i < len; ++i) {
        if (!next_line()) throw FormatError("truncated trajectory: expected " + std::to_string(len) + " samples");
        const auto j = nlohmann::json::parse(line);
        Sample s;
        s.t = j.at("t").get<std::int64_t>();
        s.state = j.at("s").get<std::vector<double>>();
        s.action = j.at("a").get<std::vector<double>>();
        s.reward = j.at("r").get<double>();
        s.label = class_label_from_string(j.at("c").get<std::string>());
        samples.push_back(std::move(s));
      }
      out.emplace_back(std::move(samples), prov);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("trajectory log line " + std::to_string(line_no) + ": " + e.what());
  }
  return out;
}

void append_trajectory(const std::filesystem::path& file, const Trajectory& trajectory,
                       std::string_view task_id) {
  std::ofstream out(file, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot open " + file.string() + " for append");
  write_trajectory(out, trajectory, task_id);
}

std::vector<Trajectory> read_trajectory_file(const std::filesystem::path& file,
                                             std::string* task_id) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  return read_trajectories(in, task_id);
}

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  nlohmann::ordered_json j;
  j["task_id"] = manifest.task_id;
  j["files"] = manifest.files;
  std::ofstream out(dir / kManifestName, std::ios::binary);
  if (!out) throw Error("cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestName, std::ios::binary);
  if (!in) throw Error("no manifest in " + dir.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return {j.at("task_id").get<std::string>(), j.at("files").get<std::vector<std::string>>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                   const std::function<std::string(const Trajectory&, std::size_t)>& file_for) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest{dataset.task_id, {}};
  for (std::size_t i = 0; i < dataset.trajectories.size(); ++i) {
    const Trajectory& t = dataset.trajectories[i];
    std::string name = file_for(t, i);
    if (std::find(manifest.files.begin(), manifest.files.end(), name) == manifest.files.end()) {
      std::filesystem::remove(dir / name);
      manifest.files.push_back(name);
    }
    append_trajectory(dir / name, t, dataset.task_id);
  }
  write_manifest(dir, manifest);
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const DatasetManifest manifest = read_manifest(dir);
  Dataset ds;
  ds.task_id = manifest.task_id;
  for (const auto& f : manifest.files) {
    auto trajs = read_trajectory_file(dir / f);
    for (auto& t : trajs) ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

}  // namespace sirius
