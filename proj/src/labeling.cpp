#include "sirius/labeling.hpp"

#include <algorithm>

#include "sirius/errors.hpp"

namespace sirius {

void LabelingConfig::validate() const {
  if (ell < 0) throw ConfigError("labeling: ell must be >= 0");
}

void to_json(nlohmann::json& j, const LabelingConfig& c) { j = nlohmann::json{{"ell", c.ell}}; }

void from_json(const nlohmann::json& j, LabelingConfig& c) { c.ell = j.value("ell", LabelingConfig{}.ell); }

std::vector<ClassLabel> relabel_preintv(std::span<const ClassLabel> labels, const LabelingConfig& config) {
  std::vector<ClassLabel> out(labels.begin(), labels.end());
  const auto ell = static_cast<std::size_t>(std::max(config.ell, 0));
  for (const Segment& seg : intervention_segments(labels)) {
    const std::size_t from = seg.start > ell ? seg.start - ell : 0;
    for (std::size_t i = from; i < seg.start; ++i) {
      if (out[i] == ClassLabel::robot) out[i] = ClassLabel::preintv;
    }
  }
  return out;
}

Trajectory relabel_preintv(const Trajectory& trajectory, const LabelingConfig& config) {
  const auto labels = trajectory.labels();
  return trajectory.with_labels(relabel_preintv(labels, config));
}

}  // namespace sirius
