#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "sirius/core_data.hpp"

namespace sirius {

struct LabelingConfig {
  /// Length of the pre-intervention window, in steps.
  int ell = 15;

  void validate() const;
};

void to_json(nlohmann::json& j, const LabelingConfig& c);
void from_json(const nlohmann::json& j, LabelingConfig& c);

/// Marks the robot samples among the `ell` steps before each intervention
/// segment as preintv. demo and intv labels are never touched, so the pass
/// is idempotent.
std::vector<ClassLabel> relabel_preintv(std::span<const ClassLabel> labels, const LabelingConfig& config);
Trajectory relabel_preintv(const Trajectory& trajectory, const LabelingConfig& config);

}  // namespace sirius
