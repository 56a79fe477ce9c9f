#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sirius/core_data.hpp"

namespace sirius {

enum class SchemeKind { sirius, iwr, unweighted };

std::string_view to_string(SchemeKind kind);
SchemeKind scheme_kind_from_string(std::string_view name);

/// Classes folded into the robot class before the target is computed.
struct AblationFlags {
  bool remove_demo = false;
  bool remove_intv = false;
  bool remove_preintv = false;

  bool any() const { return remove_demo || remove_intv || remove_preintv; }
  bool operator==(const AblationFlags&) const = default;
};

struct WeightingScheme {
  SchemeKind kind = SchemeKind::sirius;
  double p_star_intv = 0.5;
  double p_star_preintv = 0.0;
  AblationFlags ablation;

  void validate() const;
  bool operator==(const WeightingScheme&) const = default;
};

void to_json(nlohmann::json& j, const WeightingScheme& s);
void from_json(const nlohmann::json& j, WeightingScheme& s);

/// Per-class importance weight w(c) = P*(c) / P(c).
struct WeightTable {
  std::array<double, kNumClasses> w{};

  double operator[](ClassLabel c) const { return w[index_of(c)]; }
};

/// Target class distribution P* for `scheme`.
///   sirius:     P*(intv) and P*(preintv) pinned to the scheme values,
///               P*(demo) = P(demo), robot takes the remainder.
///   iwr:        P*(intv) pinned, the rest spread over all other classes in
///               proportion to their original mass.
///   unweighted: P* = P.
/// Throws MissingClass when mass is requested for an absent class and
/// InfeasibleTarget when the robot remainder would be negative.
ClassDistribution target_distribution(const ClassDistribution& p, const WeightingScheme& scheme);

/// Throws DivisionByZeroClass when P(c) = 0 < P*(c).
WeightTable weight_table(const ClassDistribution& p, const ClassDistribution& p_star);

struct SweepEntry {
  double p_star_intv = 0.0;
  bool feasible = false;
  ClassDistribution target;
  std::string reason;
};

/// Sirius targets for each P*(intv) in `grid`; infeasible points are kept
/// and flagged.
std::vector<SweepEntry> sweep_targets(const ClassDistribution& p, std::span<const double> grid,
                                      double p_star_preintv = 0.0);

}  // namespace sirius
