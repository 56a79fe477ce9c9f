#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sirius/deployment_loop.hpp"
#include "sirius/errors.hpp"
#include "sirius/labeling.hpp"

using namespace sirius;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.demos = 3;
  c.rounds = 2;
  c.max_episodes_per_round = 4;
  c.arch.hidden = {8};
  c.arch.n_modes = 2;
  c.train.epochs = 2;
  c.train.steps_per_epoch = 10;
  c.train.batch_size = 8;
  c.train.eval_interval_epochs = 1;
  c.train.eval_episodes = 2;
  c.memory.capacity = 5;
  return c;
}

RobotPolicy random_policy() {
  return [](const EnvState&, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return EnvAction{{u(rng), u(rng)}, u(rng)};
  };
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("deployment_loop") {
  TEST_CASE("quota is a third of the demo samples") {
    CHECK(intervention_quota(2442) == 814);
    CHECK(intervention_quota(3) == 1);
    CHECK(intervention_quota(4) == 2);
  }

  TEST_CASE("seed streams are distinct and stable") {
    CHECK(derive_seed(0, 1, 0) == derive_seed(0, 1, 0));
    CHECK(derive_seed(0, 1, 0) != derive_seed(0, 1, 1));
    CHECK(derive_seed(0, 1, 0) != derive_seed(0, 2, 0));
    CHECK(derive_seed(0, 1, 0) != derive_seed(1, 1, 0));
    CHECK(derive_seed(3, 1, 7) >= 0);
  }

  TEST_CASE("a random robot is always rescued") {
    RunConfig c = tiny_config();
    c.max_episodes_per_round = 6;
    ScriptedIntervenor oracle(c.task, c.oracle);
    MemoryBuffer buffer(c.memory);
    const DeployResult r = deploy_round(random_policy(), buffer, c, oracle, 1'000'000, 1, 1);
    CHECK(r.stats.episodes == 6);
    CHECK(r.stats.successes == 6);
    CHECK(r.stats.intv_samples > 0);
    CHECK_FALSE(r.stats.quota_reached);
    for (const Trajectory& t : r.trajectories) {
      CHECK(t.success());
      CHECK(relabel_preintv(t, c.labeling) == t);
    }
  }

  TEST_CASE("the quota stops a round") {
    RunConfig c = tiny_config();
    c.max_episodes_per_round = 50;
    ScriptedIntervenor oracle(c.task, c.oracle);
    MemoryBuffer buffer(c.memory);
    const DeployResult r = deploy_round(random_policy(), buffer, c, oracle, 5, 1, 1);
    CHECK(r.stats.quota_reached);
    CHECK(r.stats.episodes == 1);
    CHECK(r.stats.intv_samples >= 5);
  }

  TEST_CASE("an expert robot never needs help") {
    RunConfig c = tiny_config();
    const RobotPolicy expert = [&](const EnvState& s, std::mt19937_64&) { return expert_action(s, c.task); };
    ScriptedIntervenor oracle(c.task, c.oracle);
    MemoryBuffer buffer(c.memory);
    const DeployResult r = deploy_round(expert, buffer, c, oracle, 10, 1, 1);
    CHECK(r.stats.quota_unreachable);
    CHECK_FALSE(r.stats.quota_reached);
    CHECK(r.stats.episodes == c.max_episodes_per_round);
    CHECK(r.stats.intv_samples == 0);
    CHECK(r.stats.workload.no_segments);
  }

  TEST_CASE("same seeds give the same data") {
    const RunConfig c = tiny_config();
    const RunResult a = run(c);
    const RunResult b = run(c);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) CHECK(a.rounds[i] == b.rounds[i]);
    CHECK(a.policies == b.policies);
  }

  TEST_CASE("record layout follows the round schedule") {
    const RunConfig c = tiny_config();
    const RunResult r = run(c);
    REQUIRE(r.records.size() == 3);
    REQUIRE(r.policies.size() == 3);
    REQUIRE(r.train_sets.size() == 3);
    CHECK(r.rounds.size() == 4);
    for (int i = 0; i < 3; ++i) {
      CHECK(r.records[i].round == i);
      CHECK(r.records[i].trained_policy == i + 1);
      CHECK(r.records[i].deployment.data_round == i + 1);
      CHECK(r.records[i].deployment.deployed_policy == std::max(1, i));
      CHECK(r.records[i].train_trajectories == r.train_sets[i].trajectories.size());
    }
    CHECK(r.records[0].weights[ClassLabel::demo] == 1.0);
    for (const Trajectory& t : r.rounds[0]) CHECK(t.is_demo());
    for (std::size_t d = 1; d < r.rounds.size(); ++d) {
      for (const Trajectory& t : r.rounds[d]) CHECK(t.round() == static_cast<std::int64_t>(d));
    }
    // Each snapshot only holds data that existed when its policy started training.
    for (std::size_t i = 0; i < r.train_sets.size(); ++i) {
      for (const Trajectory& t : r.train_sets[i].trajectories) CHECK(t.round() <= static_cast<std::int64_t>(i));
    }
  }

  TEST_CASE("no iterations means warmstart only") {
    RunConfig c = tiny_config();
    c.rounds = 0;
    const RunResult r = run(c);
    CHECK(r.policies.size() == 1);
    REQUIRE(r.records.size() == 1);
    CHECK(r.rounds.size() == 1);
    CHECK(r.records[0].deployment.episodes == 0);
  }

  TEST_CASE("parallel and sequential runs write identical files") {
    const auto base = std::filesystem::temp_directory_path() / "sirius_deploy_par";
    std::filesystem::remove_all(base);
    RunConfig c = tiny_config();
    RunOptions o;
    o.out_dir = base / "par";
    run(c, o);
    c.parallel = false;
    o.out_dir = base / "seq";
    run(c, o);
    for (const char* f : {"records.json", "buffer_manifest.json", "policy_1.ckpt", "policy_3.ckpt",
                          "round_000.jsonl", "round_002.jsonl"}) {
      CAPTURE(f);
      REQUIRE(std::filesystem::exists(base / "par" / f));
      CHECK(slurp(base / "par" / f) == slurp(base / "seq" / f));
    }
    std::filesystem::remove_all(base);
  }

  TEST_CASE("a restored buffer matches the run") {
    const auto dir = std::filesystem::temp_directory_path() / "sirius_deploy_buffer";
    std::filesystem::remove_all(dir);
    RunOptions o;
    o.out_dir = dir;
    const RunResult r = run(tiny_config(), o);
    std::ifstream in(dir / "buffer_manifest.json");
    const MemoryBuffer back = MemoryBuffer::from_manifest(nlohmann::json::parse(in), dir);
    CHECK(back.manifest() == r.buffer.manifest());
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("configuration errors") {
    RunConfig c = tiny_config();
    c.demos = 0;
    CHECK_THROWS_AS(run(c), ConfigError);
    c = tiny_config();
    c.rounds = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.arch.input_dim = 5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("config JSON round-trip") {
    RunConfig c = tiny_config();
    c.sample_rollouts = false;
    c.parallel = false;
    c.seed = 17;
    const RunConfig back = nlohmann::json(c).get<RunConfig>();
    CHECK(nlohmann::json(back) == nlohmann::json(c));
    CHECK_FALSE(back.sample_rollouts);
  }

  TEST_CASE("shipped configs load") {
    const std::filesystem::path root = SIRIUS_SOURCE_DIR;
    for (const auto& entry : std::filesystem::directory_iterator(root / "configs")) {
      CAPTURE(entry.path().string());
      CHECK_NOTHROW(load_run_config(entry.path()).validate());
    }
  }
}
