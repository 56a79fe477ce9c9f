#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "sirius/adam.hpp"
#include "sirius/errors.hpp"
#include "sirius/oracle.hpp"
#include "sirius/trainer.hpp"

using namespace sirius;

namespace {

PolicyArch tiny_arch() {
  PolicyArch a;
  a.hidden = {16};
  a.n_modes = 2;
  return a;
}

Dataset demo_set(int n, const TaskConfig& task) {
  Dataset ds;
  ds.task_id = task.task_id;
  for (int i = 0; i < n; ++i) ds.trajectories.push_back(generate_demo(task, 500 + i));
  return ds;
}

TrainConfig quick(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.steps_per_epoch = 20;
  c.batch_size = 8;
  c.eval_interval_epochs = 0;
  c.adam.lr = 1e-3;
  return c;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("zero epochs return the initial parameters") {
    const TaskConfig task;
    const TrainResult r = train(demo_set(2, task), WeightingScheme{}, tiny_arch(), quick(0), task);
    CHECK(r.log.empty());
    CHECK(r.best == init_params(tiny_arch(), 0));
  }

  TEST_CASE("training lowers the loss and is reproducible") {
    const TaskConfig task;
    const Dataset ds = demo_set(3, task);
    for (Minibatch m : {Minibatch::resample, Minibatch::loss_weight}) {
      TrainConfig c = quick(6);
      c.minibatch = m;
      const TrainResult a = train(ds, WeightingScheme{}, tiny_arch(), c, task);
      REQUIRE(a.log.size() == 6);
      CHECK(a.log.back().mean_loss < a.log.front().mean_loss);
      const TrainResult b = train(ds, WeightingScheme{}, tiny_arch(), c, task);
      CHECK(a.best == b.best);
    }
  }

  TEST_CASE("all-demo data falls back to unweighted") {
    const TaskConfig task;
    const TrainResult r = class_weights_for(demo_set(2, task), WeightingScheme{});
    CHECK(r.fell_back_to_unweighted);
    CHECK(r.weights[ClassLabel::demo] == 1.0);
    CHECK(r.p_star[ClassLabel::demo] == 1.0);
  }

  TEST_CASE("weights come from the class mix") {
    Dataset ds;
    ds.trajectories.push_back(testing::make_trajectory("dddddddddd"));
    ds.trajectories.push_back(testing::make_trajectory("rrrrrrrrrrrrrrrrrrrrrrrrrrrrrrrriiiiiiiiii"));
    const TrainResult r = class_weights_for(ds, WeightingScheme{});
    CHECK_FALSE(r.fell_back_to_unweighted);
    CHECK(r.p[ClassLabel::intv] == doctest::Approx(10.0 / 52.0));
    CHECK(r.weights[ClassLabel::intv] == doctest::Approx(0.5 * 52.0 / 10.0));
    CHECK(r.weights[ClassLabel::demo] == 1.0);
  }

  TEST_CASE("evaluation is deterministic and sees the expert succeed") {
    const TaskConfig task;
    const ActionFn expert = [&](const EnvState& s) { return expert_action(s, task); };
    const EvalReport a = evaluate(expert, task, 10, 1000);
    CHECK(a.success_rate == 1.0);
    CHECK(a.mean_episode_len > 0.0);
    const PolicyParams p = init_params(tiny_arch(), 3);
    const EvalReport x = evaluate(p, task, 5, 7);
    const EvalReport y = evaluate(p, task, 5, 7);
    CHECK(x.success_rate == y.success_rate);
    CHECK(x.mean_episode_len == y.mean_episode_len);
    CHECK_THROWS_AS(evaluate(p, task, 0, 7), Error);
  }

  TEST_CASE("best checkpoint and top-k average") {
    TrainingLog log;
    for (int e = 1; e <= 6; ++e) {
      EpochRecord r;
      r.epoch = e;
      if (e % 2 == 0) r.eval_success = 0.1 * e;
      log.push_back(r);
    }
    CHECK(top_k_checkpoint_average(log, 3) == doctest::Approx((0.2 + 0.4 + 0.6) / 3.0));
    CHECK(top_k_checkpoint_average(log, 1) == doctest::Approx(0.6));
    CHECK_THROWS_AS(top_k_checkpoint_average(log, 4), InsufficientCheckpoints);
  }

  TEST_CASE("training log round-trip") {
    const auto path = std::filesystem::temp_directory_path() / "sirius_train_log.csv";
    TrainingLog log{{1, -1.25, std::nullopt, 3.5}, {2, 0.1 + 0.2, 0.75, 4.0}};
    write_training_log(path, log);
    const TrainingLog back = read_training_log(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].mean_loss == -1.25);
    CHECK_FALSE(back[0].eval_success.has_value());
    CHECK(back[1].mean_loss == 0.1 + 0.2);
    CHECK(*back[1].eval_success == 0.75);
    std::filesystem::remove(path);
  }

  TEST_CASE("config validation and JSON") {
    TrainConfig c;
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.adam.lr = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.eval_episodes = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.minibatch = Minibatch::loss_weight;
    c.adam.lr = 3e-4;
    const TrainConfig back = nlohmann::json(c).get<TrainConfig>();
    CHECK(back.minibatch == Minibatch::loss_weight);
    CHECK(back.adam.lr == 3e-4);
    CHECK_THROWS_AS(minibatch_from_string("stratified"), ConfigError);
  }

  TEST_CASE("empty dataset is rejected") {
    CHECK_THROWS_AS(train(Dataset{}, WeightingScheme{}, tiny_arch(), quick(1), TaskConfig{}), EmptyDataset);
  }
}
