#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "sirius/env2d.hpp"
#include "sirius/errors.hpp"
#include "sirius/oracle.hpp"

using namespace sirius;

namespace {

// Asymptotic Kolmogorov survival function.
double kolmogorov_p(double lambda) {
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    sum += (k % 2 == 1 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return std::clamp(sum, 0.0, 1.0);
}

double ks_uniform_p(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = (xs[i] - lo) / (hi - lo);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double sqn = std::sqrt(n);
  return kolmogorov_p((sqn + 0.12 + 0.11 / sqn) * d);
}

}  // namespace

TEST_SUITE("env2d") {
  TEST_CASE("reset is a pure function of the two seeds") {
    const TaskConfig c;
    CHECK(reset(c, 17) == reset(c, 17));
    CHECK_FALSE(reset(c, 17).object == reset(c, 18).object);
    const EnvState s = reset(c, 3);
    CHECK(s.agent == c.agent_start);
    CHECK_FALSE(s.carried);
    CHECK(s.t == 0);
  }

  TEST_CASE("degenerate object region pins the object") {
    TaskConfig c;
    c.object_init_region = {{0.2, 0.4}, {0.2, 0.4}};
    CHECK(reset(c, 5).object == Vec2{0.2, 0.4});
  }

  TEST_CASE("object placement is uniform over the region") {
    const TaskConfig c;
    std::vector<double> xs, ys;
    for (int e = 0; e < 1000; ++e) {
      const EnvState s = reset(c, 10'000 + e);
      CHECK(c.object_init_region.contains(s.object));
      xs.push_back(s.object.x);
      ys.push_back(s.object.y);
    }
    CHECK(ks_uniform_p(xs, c.object_init_region.lo.x, c.object_init_region.hi.x) > 0.01);
    CHECK(ks_uniform_p(ys, c.object_init_region.lo.y, c.object_init_region.hi.y) > 0.01);
  }

  TEST_CASE("zero action keeps the agent in place") {
    const TaskConfig c;
    const EnvState s = reset(c, 1);
    const StepResult r = step(c, s, EnvAction{{0.0, 0.0}, -1.0});
    CHECK(r.state.agent == s.agent);
    CHECK(r.state.t == 1);
    CHECK(r.reward == 0.0);
  }

  TEST_CASE("grip closes on an object within reach") {
    const TaskConfig c;
    EnvState s = reset(c, 1);
    s.agent = s.object;
    const StepResult r = step(c, s, EnvAction{{0.0, 0.0}, 1.0});
    CHECK(r.state.carried);
    CHECK(r.state.object == r.state.agent);
  }

  TEST_CASE("carried object follows the agent and is released on negative grip") {
    const TaskConfig c;
    EnvState s = reset(c, 1);
    s.agent = s.object;
    s = step(c, s, EnvAction{{0.0, 0.0}, 1.0}).state;
    s = step(c, s, EnvAction{{1.0, 0.0}, 1.0}).state;
    CHECK(s.object == s.agent);
    const Vec2 where = s.agent;
    s = step(c, s, EnvAction{{1.0, 0.0}, -1.0}).state;
    CHECK_FALSE(s.carried);
    CHECK(s.object.x == doctest::Approx(where.x + c.max_step));
    s = step(c, s, EnvAction{{1.0, 0.0}, -1.0}).state;
    CHECK(s.object.x < s.agent.x);
  }

  TEST_CASE("success predicate") {
    const TaskConfig c;
    EnvState s = reset(c, 1);
    s.object = c.goal_xy;
    s.agent = c.goal_xy;
    CHECK(success_predicate(s, c));
    s.carried = true;
    CHECK_FALSE(success_predicate(s, c));
    s.carried = false;
    s.object = {c.goal_xy.x + c.insert_tolerance + 1e-9, c.goal_xy.y};
    CHECK_FALSE(success_predicate(s, c));
    s.object = {c.goal_xy.x + c.insert_tolerance - 1e-9, c.goal_xy.y};
    CHECK(success_predicate(s, c));
  }

  TEST_CASE("stepping a finished episode throws") {
    TaskConfig c;
    c.horizon = 2;
    EnvState s = reset(c, 1);
    s = step(c, s, EnvAction{}).state;
    const StepResult r = step(c, s, EnvAction{});
    CHECK(r.done);
    CHECK_THROWS_AS(step(c, r.state, EnvAction{}), EpisodeOver);
  }

  TEST_CASE("actions are clamped before they move the agent") {
    const TaskConfig c;
    const EnvState s = reset(c, 1);
    const StepResult r = step(c, s, EnvAction{{5.0, 0.0}, -1.0});
    CHECK(r.state.agent.x == doctest::Approx(s.agent.x + c.max_step));
  }

  TEST_CASE("random walks stay in the workspace and out of the wall") {
    const TaskConfig c = TaskConfig{}.with_noise_profile();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int e = 0; e < 50; ++e) {
      EnvState s = reset(c, e);
      while (!s.done) {
        s = step(c, s, EnvAction{{u(rng), u(rng)}, u(rng)}).state;
        CHECK(s.agent.x >= 0.0);
        CHECK(s.agent.x <= 1.0);
        CHECK(s.agent.y >= 0.0);
        CHECK(s.agent.y <= 1.0);
        CHECK_FALSE(c.channel.blocks(s.agent));
      }
    }
  }

  TEST_CASE("noise is reproducible") {
    const TaskConfig c = TaskConfig{}.with_noise_profile();
    CHECK(c.action_noise_std == doctest::Approx(0.1 * c.max_step));
    const EnvState s = reset(c, 4);
    const EnvAction a{{0.3, 0.1}, -1.0};
    CHECK(step(c, s, a).state == step(c, s, a).state);
    CHECK_FALSE(step(c, s, a).state.agent == step(TaskConfig{}, s, a).state.agent);
  }

  TEST_CASE("observation layout") {
    EnvState s;
    s.agent = {0.1, 0.2};
    s.object = {0.3, 0.4};
    s.carried = true;
    s.goal = {0.9, 0.5};
    const auto o = observation(s);
    REQUIRE(o.size() == kObservationDim);
    CHECK(o[0] == 0.1);
    CHECK(o[3] == 0.4);
    CHECK(o[4] == 1.0);
    CHECK(o[5] == doctest::Approx(0.6));
    CHECK(o[6] == doctest::Approx(0.1));
  }

  TEST_CASE("inconsistent geometry is a config error") {
    TaskConfig c;
    c.grasp_radius = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TaskConfig{};
    c.goal_xy = {0.3, 0.5};
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("task config JSON round-trip") {
    const TaskConfig c = TaskConfig{}.with_noise_profile();
    nlohmann::json j = c;
    CHECK(j.get<TaskConfig>() == c);
  }
}
