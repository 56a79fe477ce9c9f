#include "sirius/weighting.hpp"

#include <cmath>

#include "sirius/errors.hpp"

namespace sirius {

namespace {

constexpr double kResidualTolerance = 1e-12;

ClassDistribution sirius_target(const ClassDistribution& p, const WeightingScheme& s) {
  const AblationFlags& ab = s.ablation;
  // Mass of the (possibly merged) robot class.
  double robot_pool = p[ClassLabel::robot];
  if (ab.remove_demo) robot_pool += p[ClassLabel::demo];
  if (ab.remove_intv) robot_pool += p[ClassLabel::intv];
  if (ab.remove_preintv) robot_pool += p[ClassLabel::preintv];

  ClassDistribution target;
  double pinned = 0.0;
  if (!ab.remove_demo) {
    target[ClassLabel::demo] = p[ClassLabel::demo];
    pinned += target[ClassLabel::demo];
  }
  if (!ab.remove_intv) {
    if (s.p_star_intv > 0.0 && p[ClassLabel::intv] == 0.0) {
      throw MissingClass("target requests intv mass but the data has no intv samples");
    }
    target[ClassLabel::intv] = s.p_star_intv;
    pinned += s.p_star_intv;
  }
  if (!ab.remove_preintv) {
    if (s.p_star_preintv > 0.0 && p[ClassLabel::preintv] == 0.0) {
      throw MissingClass("target requests preintv mass but the data has no preintv samples");
    }
    target[ClassLabel::preintv] = s.p_star_preintv;
    pinned += s.p_star_preintv;
  }

  double residual = 1.0 - pinned;
  if (residual < -kResidualTolerance) {
    throw InfeasibleTarget("robot remainder " + std::to_string(residual) +
                           " is negative (P(demo) + P*(intv) + P*(preintv) > 1)");
  }
  if (residual < 0.0) residual = 0.0;
  if (residual > kResidualTolerance && robot_pool == 0.0) {
    throw MissingClass("target assigns robot mass but the data has no robot samples");
  }

  // Every class merged into robot shares the robot weight.
  const double scale = robot_pool > 0.0 ? residual / robot_pool : 0.0;
  target[ClassLabel::robot] = p[ClassLabel::robot] * scale;
  if (ab.remove_demo) target[ClassLabel::demo] = p[ClassLabel::demo] * scale;
  if (ab.remove_intv) target[ClassLabel::intv] = p[ClassLabel::intv] * scale;
  if (ab.remove_preintv) target[ClassLabel::preintv] = p[ClassLabel::preintv] * scale;
  return target;
}

ClassDistribution iwr_target(const ClassDistribution& p, const WeightingScheme& s) {
  const double p_intv = p[ClassLabel::intv];
  if (p_intv == 0.0) throw MissingClass("iwr needs intv samples");
  const double rest = 1.0 - p_intv;
  if (rest <= 0.0) throw MissingClass("iwr needs non-intv samples");
  ClassDistribution target;
  const double share = (1.0 - s.p_star_intv) / rest;
  for (ClassLabel c : kAllClasses) target[c] = c == ClassLabel::intv ? s.p_star_intv : p[c] * share;
  return target;
}

}  // namespace

std::string_view to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::sirius: return "sirius";
    case SchemeKind::iwr: return "iwr";
    case SchemeKind::unweighted: return "unweighted";
  }
  return "unweighted";
}

SchemeKind scheme_kind_from_string(std::string_view name) {
  for (auto k : {SchemeKind::sirius, SchemeKind::iwr, SchemeKind::unweighted}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown weighting kind '" + std::string(name) + "'");
}

void WeightingScheme::validate() const {
  if (!(p_star_intv > 0.0 && p_star_intv < 1.0)) throw ConfigError("weighting: p_star_intv must be in (0, 1)");
  if (p_star_preintv < 0.0) throw ConfigError("weighting: p_star_preintv must be >= 0");
  if (!(p_star_intv + p_star_preintv < 1.0)) {
    throw ConfigError("weighting: p_star_intv + p_star_preintv must be < 1");
  }
  if (ablation.any() && kind != SchemeKind::sirius) {
    throw ConfigError("weighting: ablation flags apply to the sirius scheme only");
  }
}

void to_json(nlohmann::json& j, const WeightingScheme& s) {
  auto ablation = nlohmann::json::array();
  if (s.ablation.remove_demo) ablation.push_back("remove_demo");
  if (s.ablation.remove_intv) ablation.push_back("remove_intv");
  if (s.ablation.remove_preintv) ablation.push_back("remove_preintv");
  j = nlohmann::json{{"kind", std::string(to_string(s.kind))},
                     {"p_star_intv", s.p_star_intv},
                     {"p_star_preintv", s.p_star_preintv},
                     {"ablation", ablation}};
}

void from_json(const nlohmann::json& j, WeightingScheme& s) {
  WeightingScheme d;
  s.kind = scheme_kind_from_string(j.value("kind", std::string(to_string(d.kind))));
  s.p_star_intv = j.value("p_star_intv", d.p_star_intv);
  s.p_star_preintv = j.value("p_star_preintv", d.p_star_preintv);
  s.ablation = {};
  for (const auto& flag : j.value("ablation", nlohmann::json::array())) {
    const auto name = flag.get<std::string>();
    if (name == "remove_demo") s.ablation.remove_demo = true;
    else if (name == "remove_intv") s.ablation.remove_intv = true;
    else if (name == "remove_preintv") s.ablation.remove_preintv = true;
    else throw ConfigError("weighting: unknown ablation flag '" + name + "'");
  }
}

ClassDistribution target_distribution(const ClassDistribution& p, const WeightingScheme& scheme) {
  switch (scheme.kind) {
    case SchemeKind::sirius: return sirius_target(p, scheme);
    case SchemeKind::iwr: return iwr_target(p, scheme);
    case SchemeKind::unweighted: return p;
  }
  return p;
}

WeightTable weight_table(const ClassDistribution& p, const ClassDistribution& p_star) {
  WeightTable table;
  for (ClassLabel c : kAllClasses) {
    if (p[c] > 0.0) {
      table.w[index_of(c)] = p_star[c] / p[c];
    } else if (p_star[c] == 0.0) {
      table.w[index_of(c)] = 0.0;
    } else {
      throw DivisionByZeroClass("class " + std::string(to_string(c)) + " has target mass but no samples");
    }
  }
  return table;
}

std::vector<SweepEntry> sweep_targets(const ClassDistribution& p, std::span<const double> grid,
                                      double p_star_preintv) {
  std::vector<SweepEntry> out;
  out.reserve(grid.size());
  for (double v : grid) {
    SweepEntry e;
    e.p_star_intv = v;
    try {
      WeightingScheme s;
      s.kind = SchemeKind::sirius;
      s.p_star_intv = v;
      s.p_star_preintv = p_star_preintv;
      e.target = target_distribution(p, s);
      e.feasible = true;
    } catch (const Error& err) {
      e.reason = err.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace sirius
