#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sirius/core_data.hpp"

namespace sirius {

enum class EvictionStrategy { lfi, mfi, fifo, filo, uniform };

inline constexpr std::array<EvictionStrategy, 5> kAllStrategies = {
    EvictionStrategy::lfi, EvictionStrategy::mfi, EvictionStrategy::fifo, EvictionStrategy::filo,
    EvictionStrategy::uniform};

std::string_view to_string(EvictionStrategy s);
EvictionStrategy eviction_strategy_from_string(std::string_view name);

struct MemoryConfig {
  /// Trajectory count. With protect_demos it bounds the non-demo trajectories only.
  std::size_t capacity = 500;
  EvictionStrategy strategy = EvictionStrategy::lfi;
  std::uint64_t rng_seed = 0;
  bool protect_demos = true;
};

void to_json(nlohmann::json& j, const MemoryConfig& c);
void from_json(const nlohmann::json& j, MemoryConfig& c);

/// Where a buffered trajectory lives on disk: file name and position in it.
struct TrajectoryRef {
  std::string file;
  std::size_t index = 0;

  bool operator==(const TrajectoryRef&) const = default;
};

class MemoryBuffer {
 public:
  struct Entry {
    Trajectory trajectory;
    std::uint64_t insertion_id = 0;
    std::int64_t intv_count = 0;
    TrajectoryRef ref;
  };

  explicit MemoryBuffer(MemoryConfig config);

  /// Appends and evicts until back at capacity.
  void insert(Trajectory trajectory, TrajectoryRef ref = {});
  /// Removes trajectories in strategy order until at capacity. Throws
  /// CapacityInfeasible when the buffer is over capacity with nothing evictable.
  void evict();

  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Trajectories that count against the capacity.
  std::size_t counted_size() const;
  const MemoryConfig& config() const { return config_; }
  std::int64_t retained_intv_samples() const;

  /// Immutable copy of the buffered trajectories in insertion order.
  Dataset snapshot(const std::string& task_id) const;

  /// Manifest: config, uniform-strategy RNG state and ordered entries.
  nlohmann::json manifest() const;
  /// Restores a buffer from its manifest, loading trajectories from `dir`.
  static MemoryBuffer from_manifest(const nlohmann::json& manifest, const std::filesystem::path& dir);

 private:
  bool evictable(const Entry& e) const;
  std::size_t pick_victim();

  MemoryConfig config_;
  std::vector<Entry> entries_;
  std::uint64_t next_id_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace sirius
