#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sirius {

enum class ClassLabel : std::uint8_t { demo = 0, intv = 1, preintv = 2, robot = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses = {
    ClassLabel::demo, ClassLabel::intv, ClassLabel::preintv, ClassLabel::robot};

std::string_view to_string(ClassLabel label);
ClassLabel class_label_from_string(std::string_view name);

inline constexpr std::size_t index_of(ClassLabel c) { return static_cast<std::size_t>(c); }

enum class TrajectorySource : std::uint8_t { scripted_oracle, live_human, autonomous };

std::string_view to_string(TrajectorySource source);
TrajectorySource trajectory_source_from_string(std::string_view name);

struct Sample {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  ClassLabel label = ClassLabel::robot;
  std::int64_t t = 0;

  bool operator==(const Sample&) const = default;
};

/// Half-open [start, end) index range of a maximal intv run.
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

/// One episode. Immutable after construction; copies share the sample storage.
class Trajectory {
 public:
  struct Provenance {
    std::int64_t round = 0;
    std::int64_t seed = 0;
    bool success = false;
    TrajectorySource source = TrajectorySource::scripted_oracle;

    bool operator==(const Provenance&) const = default;
  };

  Trajectory() = default;
  /// Validates contiguous t, demo purity, consistent dimensions and
  /// actions inside [-1, 1]. Throws FormatError on violation.
  Trajectory(std::vector<Sample> samples, Provenance provenance);

  std::span<const Sample> samples() const;
  const Sample& operator[](std::size_t i) const { return samples()[i]; }
  std::size_t size() const { return samples_ ? samples_->size() : 0; }
  bool empty() const { return size() == 0; }

  const Provenance& provenance() const { return provenance_; }
  std::int64_t round() const { return provenance_.round; }
  std::int64_t seed() const { return provenance_.seed; }
  bool success() const { return provenance_.success; }
  TrajectorySource source() const { return provenance_.source; }

  std::vector<ClassLabel> labels() const;
  bool is_demo() const;

  /// A new trajectory with identical samples and the given labels.
  Trajectory with_labels(std::span<const ClassLabel> labels) const;

  friend bool operator==(const Trajectory& a, const Trajectory& b);

 private:
  std::shared_ptr<const std::vector<Sample>> samples_;
  Provenance provenance_;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::string task_id;

  std::size_t sample_count() const;
};

using ClassCounts = std::array<std::int64_t, kNumClasses>;

/// Probability mass per class, indexed by index_of(ClassLabel).
struct ClassDistribution {
  std::array<double, kNumClasses> p{};

  double operator[](ClassLabel c) const { return p[index_of(c)]; }
  double& operator[](ClassLabel c) { return p[index_of(c)]; }
  double total() const;
};

ClassCounts class_counts(const Dataset& dataset);
ClassCounts class_counts(std::span<const Trajectory> trajectories);
ClassCounts class_counts(const Trajectory& trajectory);

/// P(c) = n_c / N. Throws EmptyDataset when N = 0.
ClassDistribution class_distribution(const Dataset& dataset);
ClassDistribution class_distribution(const ClassCounts& counts);

std::vector<Segment> intervention_segments(const Trajectory& trajectory);
std::vector<Segment> intervention_segments(std::span<const ClassLabel> labels);

/// Number of intv-labelled samples.
std::int64_t intervention_count(const Trajectory& trajectory);

}  // namespace sirius
