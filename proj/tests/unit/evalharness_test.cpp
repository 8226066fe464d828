#include <gtest/gtest.h>

#include "lensloop/config.hpp"
#include "lensloop/error.hpp"
#include "lensloop/evalharness.hpp"
#include "lensloop/flywheel.hpp"
#include "test_support.hpp"

namespace lensloop {
namespace {

using testing::TempDir;

TEST(EvalMetrics, SuccessAndAverage) {
  EvalReport report;
  const double rewards[] = {1.0, 0.5, 1.0, 0.0};
  const int steps[] = {4, 15, 4, 2};
  for (int i = 0; i < 4; ++i) {
    report.per_task.push_back(TaskResult{"t" + std::to_string(i), rewards[i], steps[i], rewards[i] >= 1.0, ""});
  }
  finalize_metrics(report);
  EXPECT_DOUBLE_EQ(report.success_rate, 0.5);
  EXPECT_DOUBLE_EQ(report.avg_reward, 0.625);
  EXPECT_EQ(report.step_histogram(), (std::map<int, int>{{2, 1}, {4, 2}, {15, 1}}));
  const auto j = to_json(report);
  EXPECT_EQ(j["step_histogram"]["4"], 2);
  EXPECT_NE(render_table(report).find("success_rate 0.500  avg_reward 0.625"), std::string::npos);
  EXPECT_NE(render_histogram(report).find("4      2     ##"), std::string::npos);

  EvalReport empty;
  finalize_metrics(empty);
  EXPECT_EQ(empty.success_rate, 0.0);
}

class EvalTest : public ::testing::Test {
 protected:
  void SetUp() override { ws_ = std::make_unique<Workspace>(testing::demo_config(dir_.path() / "run")); }
  TempDir dir_;
  std::unique_ptr<Workspace> ws_;
};

TEST_F(EvalTest, ContextualizedBeatsRaw) {
  const auto tasks = ws_->split("eval");
  const EvalReport raw = evaluate(tasks, "agent", nullptr, ws_->env_factory(), ws_->gateway(), "eval");
  const EvalReport ctx = evaluate(tasks, "agent", ws_->initial_source().get(), ws_->env_factory(), ws_->gateway(), "eval");
  EXPECT_EQ(raw.mode, ObservationMode::Raw);
  EXPECT_TRUE(raw.ctx_source.empty());
  EXPECT_EQ(ctx.ctx_source, "model:ctx");

  // e1 full match; e2 misses its option (2 of 3 goal parts); e3 buys a
  // look-alike unless the results page is focused.
  ASSERT_EQ(raw.per_task.size(), 3u);
  EXPECT_DOUBLE_EQ(raw.per_task[0].reward, 1.0);
  EXPECT_NEAR(raw.per_task[1].reward, 2.0 / 3.0, 1e-9);
  EXPECT_LT(raw.per_task[2].reward, 1.0);
  EXPECT_DOUBLE_EQ(ctx.per_task[2].reward, 1.0);
  EXPECT_NEAR(raw.success_rate, 1.0 / 3.0, 1e-9);
  EXPECT_NEAR(ctx.success_rate, 2.0 / 3.0, 1e-9);
  EXPECT_GT(ctx.avg_reward, raw.avg_reward);

  const EvalReport par =
      evaluate(tasks, "agent", ws_->initial_source().get(), ws_->env_factory(), ws_->gateway(), "eval", 3);
  EXPECT_EQ(to_json(par), to_json(ctx));
  EXPECT_THROW(evaluate({}, "agent", nullptr, ws_->env_factory(), ws_->gateway()), Error);
}

TEST_F(EvalTest, FailingEnvironmentCountsZero) {
  const auto tasks = ws_->split("eval");
  const EnvironmentFactory broken = [](const Task&) -> std::unique_ptr<Environment> {
    throw Error(ErrorCode::BridgeUnavailable, "down");
  };
  const EvalReport report = evaluate(tasks, "agent", nullptr, broken, ws_->gateway());
  EXPECT_EQ(report.success_rate, 0.0);
  for (const auto& r : report.per_task) EXPECT_FALSE(r.error.empty());
}

// Exemplar checkpoint trained on the held-out steps against a checkpoint that
// never presents the target; agents match iff the stored target is shown.
TEST_F(EvalTest, CurveGoesFromZeroToK) {
  const auto train = ws_->split("train");
  const auto trajectories =
      collect_trajectories(train, "agent", nullptr, ws_->env_factory(), ws_->gateway(), 1).successful;
  const auto steps = heldout_from_trajectories(trajectories);
  ASSERT_EQ(steps.size(), 12u);

  std::vector<ScriptedRule> rules;
  std::vector<SftRecord> exemplars;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string marker = "TARGET-" + std::to_string(i) + ".";
    rules.push_back(testing::contains(marker, "Action: " + render_action(steps[i].reference)));
    exemplars.push_back(SftRecord{steps[i].goal, steps[i].history, steps[i].observation,
                                  "<extraction>" + marker + "</extraction>", 3, false, steps[i].ref});
  }
  rules.push_back(testing::always("Action: search[nothing useful]"));
  Gateway& gw = ws_->gateway();
  EnsembleConfig ensemble;
  for (const char* id : {"k1", "k2", "k3"}) {
    gw.register_backend(id, testing::scripted(rules));
    ensemble.agent_backends.push_back(id);
  }
  gw.register_backend("blank", testing::scripted({testing::always("<extraction>no focus</extraction>")}));

  const std::vector<std::shared_ptr<ContextSource>> checkpoints{
      std::make_shared<ModelContextSource>(gw, "blank"), std::make_shared<ExemplarContextSource>(exemplars, nullptr)};
  const auto curve = checkpoint_reward_curve(checkpoints, steps, ensemble, gw, 2);
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve[0].avg_action_matching_reward, 0.0);
  EXPECT_EQ(curve[1].avg_action_matching_reward, 3.0);
  EXPECT_EQ(curve[1].iteration, 1);
  EXPECT_EQ(to_json(curve)[0]["checkpoint"], "model:blank");

  // A checkpoint that cannot contextualize anything scores 0 rather than failing.
  const std::vector<std::shared_ptr<ContextSource>> empty_store{
      std::make_shared<ExemplarContextSource>(std::vector<SftRecord>{}, nullptr)};
  EXPECT_EQ(checkpoint_reward_curve(empty_store, steps, ensemble, gw, 1)[0].avg_action_matching_reward, 0.0);

  try {
    checkpoint_reward_curve(checkpoints, {}, ensemble, gw, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyHoldout);
  }
}

}  // namespace
}  // namespace lensloop
