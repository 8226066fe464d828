#include "lensloop_cli/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>

#include "lensloop/config.hpp"
#include "lensloop/datastore.hpp"
#include "lensloop/error.hpp"
#include "lensloop/evalharness.hpp"
#include "lensloop/flywheel.hpp"
#include "lensloop/trainer.hpp"

namespace lensloop::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Invocation {
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  int verbosity = 1;
  std::string demos;    // ingest
  std::string dataset;  // train
};

// Errors raised while the configuration is turned into live objects count as
// configuration errors.
class SetupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Runner {
 public:
  Runner(const Invocation& inv, std::ostream& out) : inv_(inv), out_(out) {}

  json run() {
    RunConfig config = load_config(inv_.config_path, inv_.overrides);
    try {
      ws_.emplace(std::move(config));
    } catch (const Error& e) {
      throw SetupError(e.what());
    }
    const std::string& c = inv_.command;
    if (c == "collect") return collect();
    if (c == "ingest") return ingest();
    if (c == "mine") return mine();
    if (c == "train") return train();
    if (c == "iterate") return iterate();
    if (c == "eval") return eval();
    if (c == "curve") return curve();
    return report();
  }

 private:
  void say(const std::string& line, int level = 1) {
    if (inv_.verbosity >= level) out_ << line << '\n';
  }

  Workspace& ws() { return *ws_; }
  const RunConfig& cfg() { return ws_->config(); }

  json collect() {
    TrajectoryBuffer buffer(ws().buffer_path());
    const std::vector<Task> tasks = ws().split(cfg().train_split);
    const auto ctx = cfg().collect_with_contextualizer ? ws().initial_source() : nullptr;
    const CollectResult result = collect_trajectories(tasks, cfg().agent_backend, ctx.get(), ws().env_factory(),
                                                      ws().gateway(), 0, cfg().episode_parallelism);
    const auto added = buffer.add(result.successful);
    say("collected " + std::to_string(result.successful.size()) + "/" + std::to_string(result.attempted) +
        " successful episodes, " + std::to_string(added.added) + " new");
    return json{{"attempted", result.attempted},
                {"succeeded", result.successful.size()},
                {"added", added.added},
                {"duplicates", added.duplicates},
                {"paths", {{"trajectories", ws().buffer_path().string()},
                           {"transcript", (cfg().run_dir / "transcript.jsonl").string()}}}};
  }

  json ingest() {
    const fs::path demos = inv_.demos.empty() ? cfg().seed_demos : fs::path(inv_.demos);
    if (demos.empty()) throw Error(ErrorCode::ConfigError, "no demonstrations given (--demos or seed_demos)");
    TrajectoryBuffer buffer(ws().buffer_path());
    const auto added = ingest_seed_demonstrations(demos, buffer);
    say("ingested " + std::to_string(added.added) + " demonstrations, " + std::to_string(added.duplicates) +
        " duplicates");
    return json{{"added", added.added},
                {"duplicates", added.duplicates},
                {"paths", {{"trajectories", ws().buffer_path().string()}}}};
  }

  json mine() {
    TrajectoryBuffer buffer(ws().buffer_path());
    const auto sampler = ws().first_sampler();
    if (!sampler) throw Error(ErrorCode::ConfigError, "mining needs contextualizer.initial or bootstrap_backend");
    const MineResult mined = mine_dataset(buffer.trajectories(), *sampler, cfg().ensemble, ws().gateway(), cfg().mine);
    const fs::path dir = cfg().run_dir / "mined";
    const fs::path dataset = dir / "dataset.jsonl";
    const fs::path candidates = dir / "candidates.jsonl";
    fs::create_directories(dir);
    fs::remove(dataset);
    fs::remove(candidates);
    append_candidates(candidates, mined.candidates);
    append_records(dataset, mined.records);
    say("mined " + std::to_string(mined.records.size()) + " records from " + std::to_string(mined.steps_total) +
        " steps (" + std::to_string(mined.retries) + " retries)");
    return json{{"steps_total", mined.steps_total},
                {"dataset_size", mined.records.size()},
                {"retries", mined.retries},
                {"skipped_unparsable", mined.skipped_unparsable},
                {"dropped", mined.dropped},
                {"paths", {{"dataset", dataset.string()}, {"candidates", candidates.string()}}}};
  }

  json train() {
    const fs::path dataset = inv_.dataset.empty() ? cfg().run_dir / "mined" / "dataset.jsonl" : fs::path(inv_.dataset);
    const std::vector<SftRecord> records = load_records(dataset);
    TrainerSpec spec = cfg().trainer;
    spec.output_dir = cfg().run_dir / "trained";
    const TrainerHandle handle = trainer_fit(records, spec);
    const fs::path handle_path = spec.output_dir / "handle.json";
    write_json_atomic(handle_path, json(handle));
    say("trained " + std::string(to_string(handle.kind)) + " -> " + handle.artifact_ref);
    return json{{"records", records.size()},
                {"trainer", handle},
                {"paths", {{"dataset", dataset.string()}, {"handle", handle_path.string()}}}};
  }

  json iterate() {
    TrajectoryBuffer buffer(ws().buffer_path());
    json seeded = nullptr;
    if (!cfg().seed_demos.empty()) {
      const auto added = ingest_seed_demonstrations(cfg().seed_demos, buffer);
      seeded = json{{"added", added.added}, {"duplicates", added.duplicates}};
    }
    const FlywheelSettings settings = ws().flywheel_settings();
    const auto reports =
        run_flywheel(settings, ws().initial_source(), ws().first_sampler(), buffer, ws().gateway(), ws().env_factory());
    json manifests = json::array();
    for (const auto& r : reports) {
      say("iteration " + std::to_string(r.iteration) + ": " + std::to_string(r.episodes_succeeded) + "/" +
          std::to_string(r.episodes_attempted) + " episodes, " + std::to_string(r.dataset_size) + " records, " +
          std::to_string(r.retries) + " retries");
      say("  manifest " + r.manifest_path.string());
      manifests.push_back(r.manifest_path.string());
    }
    return json{{"iterations", reports.size()},
                {"seed_demos", seeded},
                {"paths", {{"manifests", manifests},
                           {"manifest", reports.back().manifest_path.string()},
                           {"trajectories", ws().buffer_path().string()},
                           {"transcript", (cfg().run_dir / "transcript.jsonl").string()}}}};
  }

  std::shared_ptr<ContextSource> eval_source() {
    if (cfg().mode == ObservationMode::Raw) return nullptr;
    if (cfg().eval_ctx) return ws().make_source(*cfg().eval_ctx);
    if (auto latest = ws().latest_source()) return latest;
    return ws().initial_source();
  }

  json eval() {
    const std::vector<Task> tasks = ws().split(cfg().eval_split);
    if (tasks.empty()) throw Error(ErrorCode::ConfigError, "no tasks tagged '" + cfg().eval_split + "'");
    const auto ctx = eval_source();
    if (cfg().mode == ObservationMode::Contextualized && !ctx) {
      throw Error(ErrorCode::ConfigError, "Contextualized evaluation needs a contextualizer source");
    }
    const EvalReport report = evaluate(tasks, cfg().agent_backend, ctx.get(), ws().env_factory(), ws().gateway(),
                                       cfg().eval_split, cfg().episode_parallelism);
    const fs::path path = cfg().run_dir / ("eval_" + std::string(to_string(report.mode)) + ".json");
    write_json_atomic(path, to_json(report));
    say(render_table(report));
    say(render_histogram(report), 2);
    return json{{"mode", to_string(report.mode)},
                {"success_rate", report.success_rate},
                {"avg_reward", report.avg_reward},
                {"paths", {{"report", path.string()}}}};
  }

  json curve() {
    std::vector<Trajectory> heldout_trajs;
    if (!cfg().curve_heldout.empty()) {
      heldout_trajs = load_trajectories(cfg().curve_heldout);
    } else {
      heldout_trajs = TrajectoryBuffer(ws().buffer_path()).trajectories();
    }
    const std::vector<HeldoutStep> steps = heldout_from_trajectories(heldout_trajs);
    std::vector<std::shared_ptr<ContextSource>> checkpoints;
    if (const auto first = ws().first_sampler()) checkpoints.push_back(first);
    for (const auto& manifest : ws().manifests()) {
      const TrainerHandle handle = read_json(manifest)["trainer"].get<TrainerHandle>();
      checkpoints.push_back(context_from_handle(handle, ws().gateway(), ws().initial_source()));
    }
    if (checkpoints.empty()) throw Error(ErrorCode::ConfigError, "no checkpoints to compare");
    const auto points =
        checkpoint_reward_curve(checkpoints, steps, cfg().ensemble, ws().gateway(), cfg().mine.n, cfg().mine.temperature);
    const fs::path path = cfg().run_dir / "curve.json";
    write_json_atomic(path, to_json(points));
    for (const auto& p : points) {
      say(std::to_string(p.iteration) + "  " + std::to_string(p.avg_action_matching_reward) + "  " + p.checkpoint);
    }
    return json{{"points", to_json(points)}, {"paths", {{"curve", path.string()}}}};
  }

  json report() {
    json iterations = json::array();
    for (const auto& manifest : ws().manifests()) {
      const json doc = read_json(manifest);
      say("iter " + std::to_string(doc.value("iteration", 0)) + "  " + doc.value("status", "") + "  dataset " +
          doc["counts"].value("dataset_size", json(0)).dump() + "  succeeded " +
          doc["counts"].value("episodes_succeeded", json(0)).dump());
      iterations.push_back(json{{"manifest", manifest.string()}, {"counts", doc["counts"]}});
    }
    json evals = json::object();
    for (const char* mode : {"Raw", "Contextualized"}) {
      const fs::path path = cfg().run_dir / ("eval_" + std::string(mode) + ".json");
      if (!fs::exists(path)) continue;
      const json doc = read_json(path);
      evals[mode] = json{{"success_rate", doc["success_rate"]}, {"avg_reward", doc["avg_reward"]},
                         {"report", path.string()}};
      say(std::string(mode) + "  success_rate " + doc["success_rate"].dump() + "  avg_reward " +
          doc["avg_reward"].dump());
    }
    return json{{"iterations", iterations}, {"eval", evals}, {"paths", {{"run_dir", cfg().run_dir.string()}}}};
  }

  const Invocation& inv_;
  std::ostream& out_;
  std::optional<Workspace> ws_;
};

void summary(std::ostream& out, const std::string& command, int code, json body, const std::string& error = {}) {
  if (!body.is_object()) body = json::object();
  body["command"] = command;
  body["status"] = code == kExitOk ? "ok" : "error";
  body["exit_code"] = code;
  if (!error.empty()) body["error"] = error;
  out << "SUMMARY " << body.dump(-1, ' ', false, json::error_handler_t::replace) << std::endl;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lensloop: observation contextualization flywheel"};
  app.require_subcommand(1, 1);
  Invocation inv;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"collect", "Roll out training tasks and buffer successful trajectories"},
      {"ingest", "Add seed demonstrations to the trajectory buffer"},
      {"mine", "Sample, score and select contextualizations for buffered steps"},
      {"train", "Fit the configured trainer on a mined dataset"},
      {"iterate", "Run the configured number of flywheel iterations"},
      {"eval", "Evaluate the agent on the eval split"},
      {"curve", "Average best-candidate reward per checkpoint on held-out steps"},
      {"report", "Summarize manifests and evaluation reports"},
  };
  for (const auto& [name, description] : commands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("-c,--config", inv.config_path, "Run configuration (JSON)")->required();
    sub->add_option("-o,--override", inv.overrides, "key.path=value applied after loading");
    sub->add_option("-v,--verbosity", inv.verbosity, "0 quiet, 1 normal, 2 detailed")->check(CLI::Range(0, 2));
    if (name == "ingest") sub->add_option("--demos", inv.demos, "Trajectory file (defaults to seed_demos)");
    if (name == "train") sub->add_option("--dataset", inv.dataset, "Dataset file (defaults to the last mine output)");
    sub->callback([&inv, n = name] { inv.command = n; });
  }

  std::vector<std::string> argv_store{"lensloop"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    summary(out, inv.command, kExitConfig, {}, e.what());
    return kExitConfig;
  }

  int code = kExitOk;
  json body;
  std::string message;
  try {
    body = Runner(inv, out).run();
  } catch (const SetupError& e) {
    code = kExitConfig;
    message = e.what();
  } catch (const Error& e) {
    code = e.code() == ErrorCode::ConfigError ? kExitConfig : kExitFailure;
    message = e.what();
    if (!e.indices().empty()) body["indices"] = e.indices();
  } catch (const std::exception& e) {
    code = kExitFailure;
    message = e.what();
  }
  if (code != kExitOk) err << "lensloop " << inv.command << ": " << message << '\n';
  summary(out, inv.command, code, std::move(body), message);
  return code;
}

}  // namespace lensloop::cli
