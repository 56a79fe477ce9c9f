#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "sirius/errors.hpp"
#include "sirius/oracle.hpp"
#include "sirius/trajectory_io.hpp"

using namespace sirius;
using sirius::testing::make_trajectory;

namespace {

// Awkward doubles: subnormals, long mantissas, negative zero.
Trajectory awkward(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Sample> samples;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> s(7);
    for (double& x : s) x = u(rng) * 1e3;
    s[0] = 4.9e-324;
    s[1] = -0.0;
    samples.push_back({s, {u(rng), u(rng), 1.0 / 3.0}, u(rng), t % 3 ? ClassLabel::robot : ClassLabel::intv, t});
  }
  return Trajectory(std::move(samples), {2, static_cast<std::int64_t>(seed), false, TrajectorySource::live_human});
}

std::string encoded(const Trajectory& t) {
  std::ostringstream out;
  write_trajectory(out, t, "task");
  return out.str();
}

}  // namespace

TEST_SUITE("trajectory_io") {
  TEST_CASE("stream round-trip is bit exact") {
    std::stringstream io;
    const Trajectory a = awkward(1);
    const Trajectory b = generate_demo(TaskConfig{}, 3);
    write_trajectory(io, a, "task-a");
    write_trajectory(io, b, "task-b");
    std::string task;
    const auto back = read_trajectories(io, &task);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == a);
    CHECK(back[1] == b);
    CHECK(std::signbit(back[0][0].state[1]));
    CHECK(back[0].source() == TrajectorySource::live_human);
    CHECK(task == "task-b");
  }

  TEST_CASE("re-encoding is stable") {
    const std::string once = encoded(awkward(4));
    std::istringstream in(once);
    CHECK(encoded(read_trajectories(in).at(0)) == once);
  }

  TEST_CASE("files append") {
    const auto file = std::filesystem::temp_directory_path() / "sirius_io_append.jsonl";
    std::filesystem::remove(file);
    append_trajectory(file, make_trajectory("rrii", 1, 1), "x");
    append_trajectory(file, make_trajectory("rpir", 1, 2), "x");
    const auto back = read_trajectory_file(file);
    REQUIRE(back.size() == 2);
    CHECK(back[1].seed() == 2);
    std::filesystem::remove(file);
  }

  TEST_CASE("dataset directory round-trip") {
    const auto dir = std::filesystem::temp_directory_path() / "sirius_io_dataset";
    std::filesystem::remove_all(dir);
    Dataset ds;
    ds.task_id = "pick";
    ds.trajectories = {make_trajectory("ddd"), make_trajectory("rri", 1, 1), make_trajectory("rii", 2, 2),
                       make_trajectory("rrr", 1, 3)};
    write_dataset(dir, ds, [](const Trajectory& t, std::size_t) {
      return "round_" + std::to_string(t.round()) + ".jsonl";
    });
    const DatasetManifest m = read_manifest(dir);
    CHECK(m.files == std::vector<std::string>{"round_0.jsonl", "round_1.jsonl", "round_2.jsonl"});
    const Dataset back = read_dataset(dir);
    CHECK(back.task_id == "pick");
    REQUIRE(back.trajectories.size() == 4);
    // Grouped by file, in first-use order.
    CHECK(back.trajectories[1].seed() == 1);
    CHECK(back.trajectories[2].seed() == 3);
    CHECK(back.trajectories[3].seed() == 2);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("malformed logs are format errors") {
    const std::string good = encoded(make_trajectory("rri", 1, 1));
    const auto reject = [](const std::string& text) {
      std::istringstream in(text);
      CHECK_THROWS_AS(read_trajectories(in), FormatError);
    };
    reject(good.substr(0, good.rfind('\n', good.size() - 2) + 1));
    reject("{\"traj\": 3}\n");
    reject("not json\n");
    std::string bad_class = good;
    bad_class.replace(bad_class.rfind("\"intv\""), 6, "\"oops\"");
    reject(bad_class);
    std::string bad_action = good;
    bad_action.replace(bad_action.find("\"a\":[") + 5, 3, "7.0");
    reject(bad_action);
  }

  TEST_CASE("missing files and manifests") {
    CHECK_THROWS_AS(read_trajectory_file("/nonexistent/sirius.jsonl"), Error);
    CHECK_THROWS_AS(read_dataset("/nonexistent/sirius"), Error);
  }
}
