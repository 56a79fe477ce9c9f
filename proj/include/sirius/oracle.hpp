#pragma once

#include <cstdint>
#include <vector>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "sirius/core_data.hpp"
#include "sirius/env2d.hpp"

namespace sirius {

/// Scripted stand-in for the human supervisor.
struct InterventionModel {
  int reaction_delay_steps = 15;
  int stall_window = 20;
  double stall_displacement = 0.01;
  double corridor_tolerance = 0.08;
  int release_hold_steps = 10;
  /// Extra steps the supervisor keeps in reserve before the horizon runs out.
  int budget_slack_steps = 10;
  std::int64_t rng_seed = 0;

  void validate() const;
  bool operator==(const InterventionModel&) const = default;
};

void to_json(nlohmann::json& j, const InterventionModel& m);
void from_json(const nlohmann::json& j, InterventionModel& m);

enum class Owner : std::uint8_t { robot, human };

struct ControlOwner {
  Owner owner = Owner::robot;
  /// Steps since the alarm fired; set only while the robot owns control and an alarm is active.
  std::optional<int> pending_alarm_age;
  /// Consecutive alarm-free steps under human control.
  int clear_steps = 0;

  bool operator==(const ControlOwner&) const = default;
};

/// Intermediate targets the expert visits on the way from `from` to `to`,
/// ending with `to` itself. Routes through the channel when the two points
/// lie on different sides of the wall.
std::vector<Vec2> expert_route(Vec2 from, Vec2 to, const TaskConfig& config);

/// Proportional waypoint controller: approach, grasp, channel entrance,
/// traversal, slot, release. Output already clamped to [-1, 1].
EnvAction expert_action(const EnvState& state, const TaskConfig& config);

/// Steps the expert needs from `state` to finish the task (upper estimate).
int expert_steps_to_go(const EnvState& state, const TaskConfig& config);

/// Sliding window of recent states, padded by repetition at episode start.
class StateHistory {
 public:
  explicit StateHistory(int window) : window_(window) {}

  void reset(const EnvState& first);
  void push(const EnvState& s);
  std::span<const EnvState> states() const { return states_; }
  const EnvState& latest() const { return states_.back(); }
  int window() const { return window_; }

 private:
  int window_;
  std::vector<EnvState> states_;
};

/// Individual takeover predicates, exposed for diagnostics and tests.
struct MonitorReport {
  bool stall = false;
  bool off_corridor = false;
  bool dropped = false;
  bool out_of_time = false;

  bool any() const { return stall || off_corridor || dropped || out_of_time; }
};

double corridor_distance(const EnvState& state, const TaskConfig& config);

MonitorReport monitor_report(std::span<const EnvState> history, const TaskConfig& config,
                             const InterventionModel& model);

/// True iff any takeover predicate fires on the newest state in `history`.
bool monitor(std::span<const EnvState> history, const ControlOwner& owner, const TaskConfig& config,
             const InterventionModel& model);

struct Arbitration {
  ControlOwner owner;
  EnvAction action;
  ClassLabel label = ClassLabel::robot;
};

/// Human-gated team policy: the human takes over `reaction_delay_steps` after
/// a persisting alarm and hands control back after `release_hold_steps`
/// alarm-free steps.
Arbitration arbitrate(const ControlOwner& owner, bool alarm, const EnvState& state,
                      const EnvAction& robot_action, const InterventionModel& model,
                      const TaskConfig& config);

/// Full expert rollout labelled demo. Throws DemoFailed when the expert does
/// not reach the goal within the horizon.
Trajectory generate_demo(const TaskConfig& config, std::int64_t episode_seed);

}  // namespace sirius
