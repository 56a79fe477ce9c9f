#include "sirius/memory.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "sirius/errors.hpp"
#include "sirius/trajectory_io.hpp"

namespace sirius {

std::string_view to_string(EvictionStrategy s) {
  switch (s) {
    case EvictionStrategy::lfi: return "LFI";
    case EvictionStrategy::mfi: return "MFI";
    case EvictionStrategy::fifo: return "FIFO";
    case EvictionStrategy::filo: return "FILO";
    case EvictionStrategy::uniform: return "Uniform";
  }
  return "LFI";
}

EvictionStrategy eviction_strategy_from_string(std::string_view name) {
  for (auto s : kAllStrategies) {
    std::string a(to_string(s)), b(name);
    std::transform(a.begin(), a.end(), a.begin(), ::tolower);
    std::transform(b.begin(), b.end(), b.begin(), ::tolower);
    if (a == b) return s;
  }
  throw ConfigError("unknown eviction strategy '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const MemoryConfig& c) {
  j = nlohmann::json{{"capacity", c.capacity},
                     {"strategy", std::string(to_string(c.strategy))},
                     {"rng_seed", c.rng_seed},
                     {"protect_demos", c.protect_demos}};
}

void from_json(const nlohmann::json& j, MemoryConfig& c) {
  MemoryConfig d;
  c.capacity = j.value("capacity", d.capacity);
  c.strategy = eviction_strategy_from_string(j.value("strategy", std::string(to_string(d.strategy))));
  c.rng_seed = j.value("rng_seed", d.rng_seed);
  c.protect_demos = j.value("protect_demos", d.protect_demos);
}

MemoryBuffer::MemoryBuffer(MemoryConfig config) : config_(config), rng_(config.rng_seed) {}

bool MemoryBuffer::evictable(const Entry& e) const {
  return !(config_.protect_demos && e.trajectory.is_demo());
}

std::size_t MemoryBuffer::counted_size() const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return evictable(e); }));
}

std::int64_t MemoryBuffer::retained_intv_samples() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.intv_count;
  return n;
}

void MemoryBuffer::insert(Trajectory trajectory, TrajectoryRef ref) {
  Entry e;
  e.intv_count = intervention_count(trajectory);
  e.trajectory = std::move(trajectory);
  e.insertion_id = next_id_++;
  e.ref = std::move(ref);
  entries_.push_back(std::move(e));
  if (counted_size() > config_.capacity) evict();
}

std::size_t MemoryBuffer::pick_victim() {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (evictable(entries_[i])) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw CapacityInfeasible("buffer over capacity " + std::to_string(config_.capacity) +
                             " but every trajectory is protected");
  }
  // Entries are kept in insertion order, so a lower index is an older insertion.
  switch (config_.strategy) {
    case EvictionStrategy::lfi:
      return *std::min_element(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        return entries_[a].intv_count < entries_[b].intv_count;
      });
    case EvictionStrategy::mfi:
      return *std::min_element(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        return entries_[a].intv_count > entries_[b].intv_count;
      });
    case EvictionStrategy::fifo: return candidates.front();
    case EvictionStrategy::filo: return candidates.back();
    case EvictionStrategy::uniform: {
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      return candidates[pick(rng_)];
    }
  }
  return candidates.front();
}

void MemoryBuffer::evict() {
  while (counted_size() > config_.capacity) {
    entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(pick_victim()));
  }
}

Dataset MemoryBuffer::snapshot(const std::string& task_id) const {
  Dataset ds;
  ds.task_id = task_id;
  ds.trajectories.reserve(entries_.size());
  for (const auto& e : entries_) ds.trajectories.push_back(e.trajectory);
  return ds;
}

nlohmann::json MemoryBuffer::manifest() const {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::json(config_);
  j["next_id"] = next_id_;
  std::ostringstream rng_state;
  rng_state << rng_;
  j["rng_state"] = rng_state.str();
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    nlohmann::ordered_json je;
    je["file"] = e.ref.file;
    je["index"] = e.ref.index;
    je["insertion_id"] = e.insertion_id;
    je["intv"] = e.intv_count;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  return nlohmann::json::parse(j.dump());
}

MemoryBuffer MemoryBuffer::from_manifest(const nlohmann::json& manifest, const std::filesystem::path& dir) {
  try {
    MemoryBuffer buffer(manifest.at("config").get<MemoryConfig>());
    buffer.next_id_ = manifest.at("next_id").get<std::uint64_t>();
    std::istringstream rng_state(manifest.at("rng_state").get<std::string>());
    rng_state >> buffer.rng_;
    std::map<std::string, std::vector<Trajectory>> files;
    for (const auto& je : manifest.at("entries")) {
      Entry e;
      e.ref = {je.at("file").get<std::string>(), je.at("index").get<std::size_t>()};
      auto it = files.find(e.ref.file);
      if (it == files.end()) it = files.emplace(e.ref.file, read_trajectory_file(dir / e.ref.file)).first;
      if (e.ref.index >= it->second.size()) throw FormatError("manifest references a missing trajectory");
      e.trajectory = it->second[e.ref.index];
      e.insertion_id = je.at("insertion_id").get<std::uint64_t>();
      e.intv_count = je.at("intv").get<std::int64_t>();
      if (e.intv_count != intervention_count(e.trajectory)) {
        throw FormatError("manifest intervention count disagrees with " + e.ref.file);
      }
      buffer.entries_.push_back(std::move(e));
    }
    return buffer;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("buffer manifest: ") + e.what());
  }
}

}  // namespace sirius
