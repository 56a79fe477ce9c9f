#include "sirius/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sirius/errors.hpp"

namespace sirius {

namespace {

double cross(Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  if (len2 == 0.0) return distance(p, a);
  const Vec2 ap = p - a;
  const double t = std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

// Andrew's monotone chain, counter-clockwise.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double hull_distance(Vec2 p, const std::vector<Vec2>& hull) {
  if (hull.size() == 1) return distance(p, hull[0]);
  if (hull.size() == 2) return segment_distance(p, hull[0], hull[1]);
  bool inside = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 a = hull[i];
    const Vec2 b = hull[(i + 1) % hull.size()];
    if (cross(a, b, p) < 0) inside = false;
    best = std::min(best, segment_distance(p, a, b));
  }
  return inside ? 0.0 : best;
}

std::vector<Vec2> box_corners(const Box& b) {
  return {b.lo, {b.hi.x, b.lo.y}, b.hi, {b.lo.x, b.hi.y}};
}

Vec2 channel_entry(const TaskConfig& c) { return {c.channel.x0 - 1.5 * c.max_step, c.channel.center_y}; }
Vec2 channel_exit(const TaskConfig& c) { return {c.channel.x1 + 1.5 * c.max_step, c.channel.center_y}; }

// Lined up with a channel mouth, between it and the wall, so the channel can
// be entered in a straight line.
bool at_mouth(Vec2 p, Vec2 mouth, const TaskConfig& c) {
  const double tol = 0.5 * c.max_step;
  if (std::abs(p.y - mouth.y) > tol) return false;
  return mouth.x < c.channel.x0 ? p.x >= mouth.x - tol : p.x <= mouth.x + tol;
}

double route_length(Vec2 from, const std::vector<Vec2>& route) {
  double len = 0.0;
  for (const Vec2& w : route) {
    len += distance(from, w);
    from = w;
  }
  return len;
}

EnvAction steer(Vec2 from, Vec2 to, double grip, const TaskConfig& config) {
  Vec2 v = (1.0 / config.max_step) * (to - from);
  const double n = v.norm();
  if (n > 1.0) v = (1.0 / n) * v;
  return EnvAction{v, grip}.clamped();
}

}  // namespace

void InterventionModel::validate() const {
  if (reaction_delay_steps < 0) throw ConfigError("oracle: reaction_delay_steps must be >= 0");
  if (release_hold_steps < 1) throw ConfigError("oracle: release_hold_steps must be >= 1");
  if (stall_window < 2) throw ConfigError("oracle: stall_window must be >= 2");
  if (!(corridor_tolerance > 0.0) || !(stall_displacement > 0.0)) {
    throw ConfigError("oracle: thresholds must be positive");
  }
  if (budget_slack_steps < 0) throw ConfigError("oracle: budget_slack_steps must be >= 0");
}

void to_json(nlohmann::json& j, const InterventionModel& m) {
  j = nlohmann::json{{"reaction_delay_steps", m.reaction_delay_steps},
                     {"stall_window", m.stall_window},
                     {"stall_displacement", m.stall_displacement},
                     {"corridor_tolerance", m.corridor_tolerance},
                     {"release_hold_steps", m.release_hold_steps},
                     {"budget_slack_steps", m.budget_slack_steps},
                     {"rng_seed", m.rng_seed}};
}

void from_json(const nlohmann::json& j, InterventionModel& m) {
  InterventionModel d;
  m.reaction_delay_steps = j.value("reaction_delay_steps", d.reaction_delay_steps);
  m.stall_window = j.value("stall_window", d.stall_window);
  m.stall_displacement = j.value("stall_displacement", d.stall_displacement);
  m.corridor_tolerance = j.value("corridor_tolerance", d.corridor_tolerance);
  m.release_hold_steps = j.value("release_hold_steps", d.release_hold_steps);
  m.budget_slack_steps = j.value("budget_slack_steps", d.budget_slack_steps);
  m.rng_seed = j.value("rng_seed", d.rng_seed);
}

std::vector<Vec2> expert_route(Vec2 from, Vec2 to, const TaskConfig& config) {
  const Vec2 entry = channel_entry(config);
  const Vec2 exit = channel_exit(config);
  const Region rf = region_of(from, config.channel);
  const Region rt = region_of(to, config.channel);
  std::vector<Vec2> route;
  if (rf == Region::left && rt != Region::left) {
    if (!at_mouth(from, entry, config)) route.push_back(entry);
    if (rt == Region::right) route.push_back(exit);
  } else if (rf == Region::channel) {
    if (rt == Region::right) route.push_back(exit);
    if (rt == Region::left) route.push_back(entry);
  } else if (rf == Region::right && rt != Region::right) {
    if (!at_mouth(from, exit, config)) route.push_back(exit);
    if (rt == Region::left) route.push_back(entry);
  }
  route.push_back(to);
  return route;
}

EnvAction expert_action(const EnvState& state, const TaskConfig& config) {
  if (!state.carried) {
    if (distance(state.agent, state.object) <= config.grasp_radius) {
      return steer(state.agent, state.object, 1.0, config);
    }
    return steer(state.agent, expert_route(state.agent, state.object, config).front(), -1.0, config);
  }
  if (distance(state.agent, state.goal) <= 0.5 * config.insert_tolerance) {
    return EnvAction{{0.0, 0.0}, -1.0};
  }
  return steer(state.agent, expert_route(state.agent, state.goal, config).front(), 1.0, config);
}

int expert_steps_to_go(const EnvState& state, const TaskConfig& config) {
  double len = 0.0;
  int waypoints = 0;
  if (!state.carried) {
    const auto to_object = expert_route(state.agent, state.object, config);
    const auto to_goal = expert_route(state.object, state.goal, config);
    len = route_length(state.agent, to_object) + route_length(state.object, to_goal);
    waypoints = static_cast<int>(to_object.size() + to_goal.size());
  } else {
    const auto to_goal = expert_route(state.agent, state.goal, config);
    len = route_length(state.agent, to_goal);
    waypoints = static_cast<int>(to_goal.size());
  }
  // One partial step per waypoint plus grasp and release.
  return static_cast<int>(std::ceil(len / config.max_step)) + waypoints + 2;
}

void StateHistory::reset(const EnvState& first) {
  states_.assign(static_cast<std::size_t>(window_), first);
}

void StateHistory::push(const EnvState& s) {
  states_.push_back(s);
  if (states_.size() > static_cast<std::size_t>(window_)) states_.erase(states_.begin());
}

double corridor_distance(const EnvState& state, const TaskConfig& config) {
  const auto corners = box_corners(config.object_init_region);
  if (!state.carried) {
    auto pts = corners;
    pts.push_back(config.agent_start);
    return hull_distance(state.agent, convex_hull(pts));
  }
  auto pts = corners;
  pts.push_back(channel_entry(config));
  const double approach = hull_distance(state.agent, convex_hull(pts));
  const double traverse = segment_distance(state.agent, channel_entry(config), config.goal_xy);
  return std::min(approach, traverse);
}

MonitorReport monitor_report(std::span<const EnvState> history, const TaskConfig& config,
                             const InterventionModel& model) {
  MonitorReport report;
  if (history.empty()) return report;
  const EnvState& now = history.back();
  if (history.size() >= static_cast<std::size_t>(model.stall_window)) {
    const EnvState& then = history[history.size() - static_cast<std::size_t>(model.stall_window)];
    // Padding repeats the first state; only a full window of real steps counts.
    if (now.t - then.t == model.stall_window - 1) {
      report.stall = distance(now.agent, then.agent) < model.stall_displacement;
    }
  }
  report.off_corridor = corridor_distance(now, config) > model.corridor_tolerance;
  report.dropped = !now.carried && !config.object_init_region.contains(now.object) &&
                   !success_predicate(now, config);
  const int remaining = config.horizon - now.t;
  report.out_of_time =
      remaining < expert_steps_to_go(now, config) + model.reaction_delay_steps + model.budget_slack_steps;
  return report;
}

bool monitor(std::span<const EnvState> history, const ControlOwner& /*owner*/, const TaskConfig& config,
             const InterventionModel& model) {
  return monitor_report(history, config, model).any();
}

Arbitration arbitrate(const ControlOwner& owner, bool alarm, const EnvState& state,
                      const EnvAction& robot_action, const InterventionModel& model,
                      const TaskConfig& config) {
  Arbitration out;
  out.owner = owner;
  if (owner.owner == Owner::robot) {
    if (!alarm) {
      out.owner.pending_alarm_age.reset();
      out.action = robot_action.clamped();
      out.label = ClassLabel::robot;
      return out;
    }
    const int age = owner.pending_alarm_age.value_or(0);
    if (age < model.reaction_delay_steps) {
      out.owner.pending_alarm_age = age + 1;
      out.action = robot_action.clamped();
      out.label = ClassLabel::robot;
      return out;
    }
    out.owner = ControlOwner{Owner::human, std::nullopt, 0};
  }

  out.action = expert_action(state, config);
  out.label = ClassLabel::intv;
  out.owner.clear_steps = alarm ? 0 : out.owner.clear_steps + 1;
  if (out.owner.clear_steps >= model.release_hold_steps) out.owner = ControlOwner{};
  return out;
}

Trajectory generate_demo(const TaskConfig& config, std::int64_t episode_seed) {
  EnvState s = reset(config, episode_seed);
  std::vector<Sample> samples;
  bool success = false;
  while (!s.done) {
    const EnvAction a = expert_action(s, config);
    const StepResult r = step(config, s, a);
    samples.push_back({observation(s), a.to_vector(), r.reward, ClassLabel::demo, s.t});
    success = r.success;
    s = r.state;
  }
  if (!success) {
    throw DemoFailed("expert failed on episode seed " + std::to_string(episode_seed) +
                     " within horizon " + std::to_string(config.horizon));
  }
  return Trajectory(std::move(samples), {0, episode_seed, true, TrajectorySource::scripted_oracle});
}

}  // namespace sirius
