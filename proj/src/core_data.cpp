#include "sirius/core_data.hpp"

#include <algorithm>
#include <numeric>

#include "sirius/errors.hpp"

namespace sirius {

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::demo: return "demo";
    case ClassLabel::intv: return "intv";
    case ClassLabel::preintv: return "preintv";
    case ClassLabel::robot: return "robot";
  }
  return "robot";
}

ClassLabel class_label_from_string(std::string_view name) {
  for (ClassLabel c : kAllClasses) {
    if (to_string(c) == name) return c;
  }
  throw FormatError("unknown class label '" + std::string(name) + "'");
}

std::string_view to_string(TrajectorySource source) {
  switch (source) {
    case TrajectorySource::scripted_oracle: return "scripted_oracle";
    case TrajectorySource::live_human: return "live_human";
    case TrajectorySource::autonomous: return "autonomous";
  }
  return "autonomous";
}

TrajectorySource trajectory_source_from_string(std::string_view name) {
  for (auto s : {TrajectorySource::scripted_oracle, TrajectorySource::live_human,
                 TrajectorySource::autonomous}) {
    if (to_string(s) == name) return s;
  }
  throw FormatError("unknown trajectory source '" + std::string(name) + "'");
}

Trajectory::Trajectory(std::vector<Sample> samples, Provenance provenance)
    : provenance_(provenance) {
  const bool any_demo = std::any_of(samples.begin(), samples.end(),
                                    [](const Sample& s) { return s.label == ClassLabel::demo; });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.t != static_cast<std::int64_t>(i)) {
      throw FormatError("sample index " + std::to_string(i) + " carries t=" + std::to_string(s.t));
    }
    if (any_demo && s.label != ClassLabel::demo) {
      throw FormatError("demonstration trajectory mixes in a non-demo sample at t=" +
                        std::to_string(i));
    }
    if (s.state.size() != samples.front().state.size() ||
        s.action.size() != samples.front().action.size()) {
      throw FormatError("inconsistent state/action dimension at t=" + std::to_string(i));
    }
    for (double a : s.action) {
      if (!(a >= -1.0 && a <= 1.0)) {
        throw FormatError("action component outside [-1, 1] at t=" + std::to_string(i));
      }
    }
  }
  samples_ = std::make_shared<const std::vector<Sample>>(std::move(samples));
}

std::span<const Sample> Trajectory::samples() const {
  if (!samples_) return {};
  return {samples_->data(), samples_->size()};
}

std::vector<ClassLabel> Trajectory::labels() const {
  std::vector<ClassLabel> out;
  out.reserve(size());
  for (const Sample& s : samples()) out.push_back(s.label);
  return out;
}

bool Trajectory::is_demo() const {
  return !empty() && samples().front().label == ClassLabel::demo;
}

Trajectory Trajectory::with_labels(std::span<const ClassLabel> labels) const {
  if (labels.size() != size()) throw FormatError("label count does not match trajectory length");
  std::vector<Sample> copy(samples().begin(), samples().end());
  for (std::size_t i = 0; i < copy.size(); ++i) copy[i].label = labels[i];
  return Trajectory(std::move(copy), provenance_);
}

bool operator==(const Trajectory& a, const Trajectory& b) {
  if (!(a.provenance_ == b.provenance_) || a.size() != b.size()) return false;
  return std::equal(a.samples().begin(), a.samples().end(), b.samples().begin());
}

std::size_t Dataset::sample_count() const {
  return std::accumulate(trajectories.begin(), trajectories.end(), std::size_t{0},
                         [](std::size_t n, const Trajectory& t) { return n + t.size(); });
}

double ClassDistribution::total() const { return std::accumulate(p.begin(), p.end(), 0.0); }

ClassCounts class_counts(const Trajectory& trajectory) {
  ClassCounts counts{};
  for (const Sample& s : trajectory.samples()) ++counts[index_of(s.label)];
  return counts;
}

ClassCounts class_counts(std::span<const Trajectory> trajectories) {
  ClassCounts counts{};
  for (const Trajectory& t : trajectories) {
    const ClassCounts c = class_counts(t);
    for (std::size_t i = 0; i < kNumClasses; ++i) counts[i] += c[i];
  }
  return counts;
}

ClassCounts class_counts(const Dataset& dataset) { return class_counts(dataset.trajectories); }

ClassDistribution class_distribution(const ClassCounts& counts) {
  const std::int64_t n = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  if (n == 0) throw EmptyDataset();
  ClassDistribution dist;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    dist.p[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
  }
  return dist;
}

ClassDistribution class_distribution(const Dataset& dataset) {
  return class_distribution(class_counts(dataset));
}

std::vector<Segment> intervention_segments(std::span<const ClassLabel> labels) {
  std::vector<Segment> segments;
  std::size_t i = 0;
  while (i < labels.size()) {
    if (labels[i] != ClassLabel::intv) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < labels.size() && labels[i] == ClassLabel::intv) ++i;
    segments.push_back({start, i});
  }
  return segments;
}

std::vector<Segment> intervention_segments(const Trajectory& trajectory) {
  const auto labels = trajectory.labels();
  return intervention_segments(labels);
}

std::int64_t intervention_count(const Trajectory& trajectory) {
  return class_counts(trajectory)[index_of(ClassLabel::intv)];
}

}  // namespace sirius
