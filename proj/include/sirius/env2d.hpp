#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace sirius {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Box {
  Vec2 lo;
  Vec2 hi;

  bool contains(Vec2 p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
  bool operator==(const Box&) const = default;
};

/// Horizontal corridor through a wall. The wall occupies x in [x0, x1]
/// everywhere except the band |y - center_y| <= width / 2.
struct Channel {
  double x0 = 0.6;
  double x1 = 0.85;
  double center_y = 0.5;
  double width = 0.06;

  double y_lo() const { return center_y - 0.5 * width; }
  double y_hi() const { return center_y + 0.5 * width; }
  bool in_band(Vec2 p) const { return p.y >= y_lo() && p.y <= y_hi(); }
  bool blocks(Vec2 p) const { return p.x >= x0 && p.x <= x1 && !in_band(p); }
  bool operator==(const Channel&) const = default;
};

struct TaskConfig {
  std::string task_id = "pick_insert";
  std::int64_t seed = 0;
  int horizon = 200;
  double max_step = 0.02;
  Vec2 agent_start{0.05, 0.5};
  Box object_init_region{{0.15, 0.25}, {0.35, 0.75}};
  Vec2 goal_xy{0.92, 0.5};
  Channel channel;
  double grasp_radius = 0.03;
  double insert_tolerance = 0.015;
  /// Std of the Gaussian perturbation added to each displacement component, in workspace units.
  double action_noise_std = 0.0;

  /// Throws ConfigError when the geometry is inconsistent.
  void validate() const;
  /// Noisy experiment profile: std = 0.1 * max_step.
  TaskConfig with_noise_profile() const;

  bool operator==(const TaskConfig&) const = default;
};

void to_json(nlohmann::json& j, const TaskConfig& c);
void from_json(const nlohmann::json& j, TaskConfig& c);

struct EnvState {
  Vec2 agent;
  Vec2 object;
  bool carried = false;
  Vec2 goal;
  int t = 0;
  bool done = false;
  /// Keys the per-step noise stream so step() stays a pure function.
  std::uint64_t noise_key = 0;

  bool operator==(const EnvState&) const = default;
};

struct EnvAction {
  Vec2 dxdy;
  double grip = -1.0;

  EnvAction clamped() const;
  std::vector<double> to_vector() const { return {dxdy.x, dxdy.y, grip}; }
  static EnvAction from_vector(const std::vector<double>& a);
  bool operator==(const EnvAction&) const = default;
};

inline constexpr int kObservationDim = 7;
inline constexpr int kActionDim = 3;

/// Policy input: [agent_xy, object_xy, carried, goal_xy - object_xy].
std::vector<double> observation(const EnvState& s);

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

EnvState reset(const TaskConfig& config, std::int64_t episode_seed);

/// Throws EpisodeOver when `state.done`.
StepResult step(const TaskConfig& config, const EnvState& state, const EnvAction& action);

bool success_predicate(const EnvState& state, const TaskConfig& config);

enum class Region { left, channel, right };
Region region_of(Vec2 p, const Channel& channel);

}  // namespace sirius
