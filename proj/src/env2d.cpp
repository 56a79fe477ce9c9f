#include "sirius/env2d.hpp"

#include <algorithm>
#include <random>

#include "sirius/errors.hpp"

namespace sirius {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vec2 clamp_unit(Vec2 p) { return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)}; }

nlohmann::json vec_json(Vec2 v) { return nlohmann::json::array({v.x, v.y}); }
Vec2 vec_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void TaskConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("task config: " + what); };
  if (horizon < 1) fail("horizon must be >= 1");
  if (!(max_step > 0.0)) fail("max_step must be positive");
  if (!(grasp_radius > 0.0) || !(insert_tolerance > 0.0)) fail("tolerances must be positive");
  if (action_noise_std < 0.0) fail("action_noise_std must be >= 0");
  if (!(channel.x0 < channel.x1) || !(channel.width > 0.0)) fail("channel must have positive extent");
  if (channel.y_lo() < 0.0 || channel.y_hi() > 1.0) fail("channel band leaves the workspace");
  if (object_init_region.hi.x >= channel.x0 || agent_start.x >= channel.x0) {
    fail("object region and start must lie on the entry side of the channel");
  }
  if (goal_xy.x <= channel.x1 || goal_xy.x > 1.0) fail("goal must lie on the exit side of the channel");
  if (object_init_region.lo.x > object_init_region.hi.x ||
      object_init_region.lo.y > object_init_region.hi.y) {
    fail("object_init_region is inverted");
  }
}

TaskConfig TaskConfig::with_noise_profile() const {
  TaskConfig c = *this;
  c.action_noise_std = 0.1 * max_step;
  return c;
}

void to_json(nlohmann::json& j, const TaskConfig& c) {
  j = nlohmann::json{
      {"task_id", c.task_id},
      {"seed", c.seed},
      {"horizon", c.horizon},
      {"max_step", c.max_step},
      {"agent_start", vec_json(c.agent_start)},
      {"object_init_region", {{"lo", vec_json(c.object_init_region.lo)}, {"hi", vec_json(c.object_init_region.hi)}}},
      {"goal_xy", vec_json(c.goal_xy)},
      {"channel", {{"x0", c.channel.x0}, {"x1", c.channel.x1}, {"center_y", c.channel.center_y}, {"width", c.channel.width}}},
      {"grasp_radius", c.grasp_radius},
      {"insert_tolerance", c.insert_tolerance},
      {"action_noise_std", c.action_noise_std},
  };
}

void from_json(const nlohmann::json& j, TaskConfig& c) {
  TaskConfig d;
  c.task_id = j.value("task_id", d.task_id);
  c.seed = j.value("seed", d.seed);
  c.horizon = j.value("horizon", d.horizon);
  c.max_step = j.value("max_step", d.max_step);
  c.agent_start = j.contains("agent_start") ? vec_from(j["agent_start"]) : d.agent_start;
  if (j.contains("object_init_region")) {
    c.object_init_region = {vec_from(j["object_init_region"].at("lo")),
                            vec_from(j["object_init_region"].at("hi"))};
  } else {
    c.object_init_region = d.object_init_region;
  }
  c.goal_xy = j.contains("goal_xy") ? vec_from(j["goal_xy"]) : d.goal_xy;
  c.channel = d.channel;
  if (j.contains("channel")) {
    const auto& ch = j["channel"];
    c.channel.x0 = ch.value("x0", d.channel.x0);
    c.channel.x1 = ch.value("x1", d.channel.x1);
    c.channel.center_y = ch.value("center_y", d.channel.center_y);
    c.channel.width = ch.value("width", d.channel.width);
  }
  c.grasp_radius = j.value("grasp_radius", d.grasp_radius);
  c.insert_tolerance = j.value("insert_tolerance", d.insert_tolerance);
  c.action_noise_std = j.value("action_noise_std", d.action_noise_std);
}

EnvAction EnvAction::clamped() const {
  return {{std::clamp(dxdy.x, -1.0, 1.0), std::clamp(dxdy.y, -1.0, 1.0)}, std::clamp(grip, -1.0, 1.0)};
}

EnvAction EnvAction::from_vector(const std::vector<double>& a) {
  if (a.size() != static_cast<std::size_t>(kActionDim)) throw FormatError("action must have 3 components");
  return {{a[0], a[1]}, a[2]};
}

std::vector<double> observation(const EnvState& s) {
  return {s.agent.x, s.agent.y, s.object.x, s.object.y, s.carried ? 1.0 : 0.0,
          s.goal.x - s.object.x, s.goal.y - s.object.y};
}

Region region_of(Vec2 p, const Channel& channel) {
  if (p.x < channel.x0) return Region::left;
  if (p.x > channel.x1) return Region::right;
  return Region::channel;
}

EnvState reset(const TaskConfig& config, std::int64_t episode_seed) {
  std::seed_seq seq{static_cast<std::uint64_t>(config.seed), static_cast<std::uint64_t>(episode_seed)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Box& r = config.object_init_region;
  const double ux = unit(rng);
  const double uy = unit(rng);

  EnvState s;
  s.agent = config.agent_start;
  s.object = {r.lo.x + (r.hi.x - r.lo.x) * ux, r.lo.y + (r.hi.y - r.lo.y) * uy};
  s.carried = false;
  s.goal = config.goal_xy;
  s.t = 0;
  s.done = false;
  s.noise_key = splitmix64(rng());
  return s;
}

bool success_predicate(const EnvState& state, const TaskConfig& config) {
  return !state.carried && distance(state.object, state.goal) <= config.insert_tolerance &&
         state.object.x > config.channel.x1;
}

StepResult step(const TaskConfig& config, const EnvState& state, const EnvAction& raw_action) {
  if (state.done || state.t >= config.horizon) throw EpisodeOver();
  const EnvAction action = raw_action.clamped();

  Vec2 delta = config.max_step * action.dxdy;
  if (config.action_noise_std > 0.0) {
    std::mt19937_64 rng(splitmix64(state.noise_key ^ splitmix64(static_cast<std::uint64_t>(state.t))));
    std::normal_distribution<double> noise(0.0, config.action_noise_std);
    delta.x += noise(rng);
    delta.y += noise(rng);
  }

  EnvState next = state;
  const Vec2 proposed = clamp_unit(state.agent + delta);
  // A move that would end inside the wall is rejected whole.
  if (!config.channel.blocks(proposed)) next.agent = proposed;

  if (state.carried) {
    next.object = next.agent;
    if (action.grip < 0.0) next.carried = false;
  } else if (action.grip >= 0.0 && distance(next.agent, state.object) <= config.grasp_radius) {
    next.carried = true;
    next.object = next.agent;
  }

  next.t = state.t + 1;
  StepResult out;
  out.success = success_predicate(next, config);
  out.reward = out.success ? 1.0 : 0.0;
  out.done = out.success || next.t == config.horizon;
  next.done = out.done;
  out.state = next;
  return out;
}

}  // namespace sirius
