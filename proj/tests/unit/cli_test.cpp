#include <gtest/gtest.h>

#include "lensloop/config.hpp"
#include "lensloop/datastore.hpp"
#include "lensloop/error.hpp"
#include "lensloop_cli/cli.hpp"
#include "test_support.hpp"

namespace lensloop {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
  nlohmann::json summary;
};

CliRun invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  CliRun r;
  r.code = cli::dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  const auto at = r.out.rfind("SUMMARY ");
  if (at != std::string::npos) r.summary = nlohmann::json::parse(r.out.substr(at + 8));
  return r;
}

std::vector<std::string> demo_args(const std::string& command, const fs::path& run_dir,
                                   std::vector<std::string> extra = {}) {
  std::vector<std::string> args{command, "-c", (testing::demo_dir() / "run.json").string(), "-o",
                                "run_dir=\"" + run_dir.string() + "\""};
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

TEST(Cli, IterateEvalCurveReport) {
  TempDir dir;
  const fs::path run_dir = dir / "run";
  const CliRun it = invoke(demo_args("iterate", run_dir));
  ASSERT_EQ(it.code, cli::kExitOk) << it.err;
  EXPECT_EQ(it.summary["status"], "ok");
  EXPECT_EQ(it.summary["iterations"], 2);
  EXPECT_TRUE(fs::exists(run_dir / "iter_1" / "manifest.json"));
  EXPECT_TRUE(fs::exists(run_dir / "iter_2" / "trainer" / "exemplars.jsonl"));
  EXPECT_TRUE(fs::exists(run_dir / "transcript.jsonl"));

  const CliRun ctx = invoke(demo_args("eval", run_dir));
  ASSERT_EQ(ctx.code, 0) << ctx.err;
  EXPECT_EQ(ctx.summary["mode"], "Contextualized");
  const CliRun raw = invoke(demo_args("eval", run_dir, {"-o", "mode=Raw"}));
  ASSERT_EQ(raw.code, 0) << raw.err;
  EXPECT_EQ(raw.summary["mode"], "Raw");
  EXPECT_TRUE(fs::exists(run_dir / "eval_Raw.json"));
  EXPECT_GT(ctx.summary["success_rate"].get<double>(), raw.summary["success_rate"].get<double>());

  const CliRun curve = invoke(demo_args("curve", run_dir));
  ASSERT_EQ(curve.code, 0) << curve.err;
  const auto& points = curve.summary["points"];
  ASSERT_EQ(points.size(), 3u);
  for (std::size_t i = 1; i < points.size(); ++i) {
    EXPECT_GE(points[i]["avg_action_matching_reward"].get<double>(),
              points[i - 1]["avg_action_matching_reward"].get<double>());
  }

  const CliRun report = invoke(demo_args("report", run_dir, {"-v", "0"}));
  ASSERT_EQ(report.code, 0);
  EXPECT_EQ(report.summary["iterations"].size(), 2u);
  EXPECT_TRUE(report.summary["eval"].contains("Raw"));
  EXPECT_EQ(report.out.find("iter 1"), std::string::npos);  // quiet
}

TEST(Cli, StepwiseCommands) {
  TempDir dir;
  const fs::path run_dir = dir / "run";
  const CliRun collect = invoke(demo_args("collect", run_dir));
  ASSERT_EQ(collect.code, 0) << collect.err;
  EXPECT_EQ(collect.summary["succeeded"], 3);
  EXPECT_EQ(invoke(demo_args("collect", run_dir)).summary["duplicates"], 3);

  const CliRun mine = invoke(demo_args("mine", run_dir));
  ASSERT_EQ(mine.code, 0) << mine.err;
  EXPECT_EQ(mine.summary["dataset_size"], 12);
  const CliRun train = invoke(demo_args("train", run_dir));
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_EQ(train.summary["trainer"]["kind"], "exemplar");
  EXPECT_EQ(read_json(run_dir / "trained" / "handle.json")["kind"], "exemplar");

  const CliRun ingest = invoke(demo_args("ingest", run_dir, {"--demos", (run_dir / "trajectories.jsonl").string()}));
  ASSERT_EQ(ingest.code, 0) << ingest.err;
  EXPECT_EQ(ingest.summary["duplicates"], 3);
}

TEST(Cli, ArtifactsAreByteStable) {
  TempDir a;
  TempDir b;
  ASSERT_EQ(invoke(demo_args("iterate", a / "run")).code, 0);
  ASSERT_EQ(invoke(demo_args("iterate", b / "run")).code, 0);
  for (const char* file : {"iter_1/dataset.jsonl", "iter_1/candidates.jsonl", "iter_2/dataset.jsonl",
                           "iter_2/candidates.jsonl", "trajectories.jsonl"}) {
    EXPECT_EQ(testing::slurp(a / "run" / file), testing::slurp(b / "run" / file)) << file;
  }
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  const CliRun missing = invoke({"iterate", "-c", (dir / "nope.json").string()});
  EXPECT_EQ(missing.code, cli::kExitConfig);
  EXPECT_EQ(missing.summary["status"], "error");
  EXPECT_EQ(missing.summary["exit_code"], 2);
  EXPECT_FALSE(missing.err.empty());

  EXPECT_EQ(invoke({}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"iterate"}).code, cli::kExitConfig);
  EXPECT_EQ(invoke(demo_args("eval", dir / "run", {"-v", "7"})).code, cli::kExitConfig);
  EXPECT_EQ(invoke(demo_args("eval", dir / "run", {"-o", "mode=Sideways"})).code, cli::kExitConfig);
  EXPECT_EQ(invoke(demo_args("eval", dir / "run", {"-o", "agent_backend=\"ghost\""})).code, cli::kExitConfig);
  // Mining an empty buffer is a runtime failure, not a configuration error.
  const CliRun empty = invoke(demo_args("mine", dir / "run"));
  EXPECT_EQ(empty.code, cli::kExitFailure);
  EXPECT_NE(empty.summary["error"].get<std::string>().find("empty"), std::string::npos);
}

TEST(Config, Overrides) {
  nlohmann::json doc{{"a", {{"b", 1}}}};
  apply_override(doc, "a.b=2");
  apply_override(doc, "a.c.d=[1,2]");
  apply_override(doc, "name=plain text");
  apply_override(doc, "flag=true");
  EXPECT_EQ(doc["a"]["b"], 2);
  EXPECT_EQ(doc["a"]["c"]["d"], nlohmann::json::parse("[1,2]"));
  EXPECT_EQ(doc["name"], "plain text");
  EXPECT_EQ(doc["flag"], true);
  EXPECT_THROW(apply_override(doc, "novalue"), Error);
  EXPECT_THROW(apply_override(doc, "a.b.c=1"), Error);
}

TEST(Config, DemoConfigParses) {
  TempDir dir;
  const RunConfig cfg = testing::demo_config(dir / "run", {"contextualizer.n=4"});
  EXPECT_EQ(cfg.run_dir, dir / "run");
  EXPECT_EQ(cfg.mine.n, 4);
  EXPECT_EQ(cfg.iterations, 2);
  EXPECT_EQ(cfg.ensemble.size(), 3u);
  EXPECT_EQ(cfg.ensemble.judge_backend, "judge");
  EXPECT_EQ(cfg.catalog, testing::demo_dir() / "toyshop_catalog_v1.json");
  EXPECT_EQ(cfg.hash().size(), 64u);
  EXPECT_NE(cfg.hash(), testing::demo_config(dir / "run").hash());
  EXPECT_EQ(testing::demo_config(dir / "run").hash(), testing::demo_config(dir / "run").hash());
}

}  // namespace
}  // namespace lensloop
