#pragma once

#include <string_view>
#include <vector>

#include "sirius/core_data.hpp"

namespace sirius::testing {

/// Labels from a compact code: d=demo, i=intv, p=preintv, r=robot.
inline std::vector<ClassLabel> labels_from(std::string_view codes) {
  std::vector<ClassLabel> out;
  for (char c : codes) {
    switch (c) {
      case 'd': out.push_back(ClassLabel::demo); break;
      case 'i': out.push_back(ClassLabel::intv); break;
      case 'p': out.push_back(ClassLabel::preintv); break;
      default: out.push_back(ClassLabel::robot); break;
    }
  }
  return out;
}

inline Trajectory make_trajectory(std::span<const ClassLabel> labels, std::int64_t round = 1,
                                  std::int64_t seed = 0, bool success = true) {
  std::vector<Sample> samples;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const double x = static_cast<double>(t) / 100.0;
    samples.push_back({{x, 0.5, 0.2, 0.3, 0.0, 0.7, 0.2}, {0.5, -0.25, -1.0}, 0.0, labels[t],
                       static_cast<std::int64_t>(t)});
  }
  return Trajectory(std::move(samples), {round, seed, success, TrajectorySource::scripted_oracle});
}

inline Trajectory make_trajectory(std::string_view codes, std::int64_t round = 1, std::int64_t seed = 0) {
  const auto labels = labels_from(codes);
  return make_trajectory(labels, codes.find('d') != std::string_view::npos ? 0 : round, seed);
}

}  // namespace sirius::testing
