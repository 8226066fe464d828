#include "lensloop/flywheel.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <thread>

#include "lensloop/datastore.hpp"
#include "lensloop/error.hpp"
#include "lensloop/gateway.hpp"

namespace lensloop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

TrajectoryBuffer::TrajectoryBuffer(fs::path path) : path_(std::move(path)) {
  if (path_.empty() || !fs::exists(path_)) return;
  for (auto& t : load_trajectories(path_)) {
    if (keys_.insert(dedup_key(t)).second) items_.push_back(std::move(t));
  }
}

std::string TrajectoryBuffer::dedup_key(const Trajectory& trajectory) {
  const std::vector<Action> actions = trajectory.actions();
  return trajectory.task.id + "\n" + action_sequence_hash(actions, trajectory.dialect);
}

TrajectoryBuffer::AddResult TrajectoryBuffer::add(std::span<const Trajectory> trajectories) {
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].final_reward < 1.0) bad.push_back(i);
  }
  if (!bad.empty()) {
    std::string list;
    for (const auto i : bad) list += (list.empty() ? "" : ",") + std::to_string(i);
    throw Error(ErrorCode::NonSuccessfulDemo, "trajectories below reward 1 at indices " + list, std::move(bad));
  }

  AddResult result;
  std::vector<Trajectory> fresh;
  for (const auto& t : trajectories) {
    if (keys_.insert(dedup_key(t)).second) {
      fresh.push_back(t);
      ++result.added;
    } else {
      ++result.duplicates;
    }
  }
  if (!fresh.empty() && !path_.empty()) append_trajectories(path_, fresh);
  items_.insert(items_.end(), fresh.begin(), fresh.end());
  return result;
}

CollectResult collect_trajectories(std::span<const Task> tasks, const std::string& agent_backend, ContextSource* ctx,
                                   const EnvironmentFactory& make_env, Gateway& gateway, int iteration,
                                   int parallelism) {
  std::vector<EpisodeResult> episodes(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        auto env = make_env(tasks[i]);
        episodes[i] = run_episode(tasks[i], *env, gateway, agent_backend, ctx, iteration);
      } catch (const Error& e) {
        episodes[i].trajectory.task = tasks[i];
        episodes[i].error = e.what();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(std::max(parallelism, 1), std::max<std::size_t>(tasks.size(), 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  CollectResult result;
  result.attempted = tasks.size();
  for (auto& episode : episodes) {
    if (episode.error.empty() && episode.trajectory.final_reward >= 1.0) {
      result.successful.push_back(std::move(episode.trajectory));
    } else {
      ++result.failed;
    }
  }
  return result;
}

TrajectoryBuffer::AddResult ingest_seed_demonstrations(const fs::path& path, TrajectoryBuffer& buffer) {
  std::vector<Trajectory> demos;
  try {
    demos = load_trajectories(path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedLine) throw Error(ErrorCode::SchemaError, e.what(), e.indices());
    throw;
  }
  for (auto& demo : demos) demo.iteration = 0;
  return buffer.add(demos);
}

MineResult mine_dataset(std::span<const Trajectory> trajectories, ContextSource& ctx, const EnsembleConfig& ensemble,
                        Gateway& gateway, const MineOptions& options) {
  if (trajectories.empty()) throw Error(ErrorCode::EmptyDataset, "trajectory buffer is empty");
  MineResult result;
  for (const auto& traj : trajectories) {
    const std::vector<Action> actions = traj.actions();
    for (std::size_t s = 0; s < traj.steps.size(); ++s) {
      ++result.steps_total;
      const TrajectoryStep& step = traj.steps[s];
      const std::string history = serialize_history(std::span<const Action>(actions.data(), s));
      const StepRef ref{traj.id, static_cast<int>(s)};
      const StepContext scoring{traj.task.instruction, history, step.action, traj.dialect};
      CtxRequest request{traj.task.instruction, history, step.observation.text, std::nullopt, traj.domain_info};

      const auto score_round = [&](bool from_retry) {
        std::vector<CandidateRecord> round;
        for (const auto& candidate : ctx.sample(request, options.n, options.temperature)) {
          round.push_back(score_candidate(gateway, candidate, scoring, ensemble, ref, from_retry));
        }
        return round;
      };

      std::vector<CandidateRecord> round;
      try {
        round = score_round(false);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::AllUnparsable) throw;
        ++result.skipped_unparsable;
        continue;
      }
      result.candidates.insert(result.candidates.end(), round.begin(), round.end());
      Selection selection = select_best(round);
      bool from_retry = false;
      if (selection.kind == Selection::Kind::RetryRequired) {
        ++result.retries;
        from_retry = true;
        request.hint_action = step.action;
        try {
          round = score_round(true);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::AllUnparsable) throw;
          ++result.skipped_unparsable;
          continue;
        }
        result.candidates.insert(result.candidates.end(), round.begin(), round.end());
        selection = select_best(round);
      }

      const CandidateRecord& winner = round[selection.index];
      if (from_retry && winner.reward == 0 && !options.keep_zero_reward_retry) {
        ++result.dropped;
        continue;
      }
      result.records.push_back(SftRecord{traj.task.instruction, history, step.observation.text,
                                         winner.candidate.raw_text, winner.reward, from_retry, ref});
      ++result.steps_mined;
    }
  }
  return result;
}

fs::path iteration_dir(const fs::path& run_dir, int iteration) {
  return run_dir / ("iter_" + std::to_string(iteration));
}

json manifest_json(const IterationReport& report, const FlywheelSettings& settings) {
  json manifest{
      {"iteration", report.iteration},
      {"status", report.ok ? "ok" : "failed"},
      {"counts",
       {{"episodes_attempted", report.episodes_attempted},
        {"episodes_succeeded", report.episodes_succeeded},
        {"buffer_size", report.buffer_size},
        {"steps_total", report.steps_total},
        {"steps_mined", report.steps_mined},
        {"retries", report.retries},
        {"skipped_unparsable", report.skipped_unparsable},
        {"dropped", report.dropped},
        {"dataset_size", report.dataset_size}}},
      {"artifacts",
       {{"dataset", report.dataset_path.string()},
        {"candidates", report.candidates_path.string()},
        {"trajectories", (settings.run_dir / "trajectories.jsonl").string()},
        {"trainer_dir", (iteration_dir(settings.run_dir, report.iteration) / "trainer").string()}}},
      {"config_hash", settings.config_hash},
      {"inputs",
       {{"ctx_source", report.ctx_source},
        {"agent_backend", settings.agent_backend},
        {"n", settings.mine.n},
        {"temperature", settings.mine.temperature},
        {"ensemble", settings.ensemble.agent_backends}}},
      {"trainer", report.trainer ? json(*report.trainer) : json(nullptr)},
  };
  if (!report.error.empty()) manifest["error"] = report.error;
  return manifest;
}

IterationReport run_iteration(const FlywheelSettings& settings, int iteration, ContextSource& mine_ctx,
                              ContextSource* collect_ctx, TrajectoryBuffer& buffer, Gateway& gateway,
                              const EnvironmentFactory& make_env) {
  const fs::path dir = iteration_dir(settings.run_dir, iteration);
  fs::create_directories(dir);
  IterationReport report;
  report.iteration = iteration;
  report.ctx_source = mine_ctx.describe();
  report.manifest_path = dir / "manifest.json";
  report.dataset_path = dir / "dataset.jsonl";
  report.candidates_path = dir / "candidates.jsonl";
  // Re-running an iteration replaces its artifacts.
  fs::remove(report.dataset_path);
  fs::remove(report.candidates_path);

  const std::string started = utc_now();
  const auto write_manifest = [&] {
    json manifest = manifest_json(report, settings);
    manifest["metadata"] = {{"started_at", started}, {"finished_at", utc_now()}};
    write_json_atomic(report.manifest_path, manifest);
  };

  try {
    const CollectResult collected = collect_trajectories(settings.train_tasks, settings.agent_backend, collect_ctx,
                                                         make_env, gateway, iteration, settings.episode_parallelism);
    report.episodes_attempted = collected.attempted;
    report.episodes_succeeded = collected.successful.size();
    buffer.add(collected.successful);
    report.buffer_size = buffer.size();

    const MineResult mined = mine_dataset(buffer.trajectories(), mine_ctx, settings.ensemble, gateway, settings.mine);
    report.steps_total = mined.steps_total;
    report.steps_mined = mined.steps_mined;
    report.retries = mined.retries;
    report.skipped_unparsable = mined.skipped_unparsable;
    report.dropped = mined.dropped;
    report.dataset_size = mined.records.size();
    append_candidates(report.candidates_path, mined.candidates);
    append_records(report.dataset_path, mined.records);

    TrainerSpec spec = settings.trainer;
    spec.output_dir = dir / "trainer";
    report.trainer = trainer_fit(mined.records, spec);
    report.ok = true;
  } catch (const Error& e) {
    report.ok = false;
    report.error = e.what();
    write_manifest();
    throw;
  }
  write_manifest();
  return report;
}

std::shared_ptr<ContextSource> context_from_handle(const TrainerHandle& handle, Gateway& gateway,
                                                   std::shared_ptr<ContextSource> fallback) {
  if (handle.kind == TrainerKind::Exemplar) return ExemplarContextSource::from_file(handle.artifact_ref, fallback);
  if (!gateway.has_backend(handle.artifact_ref)) {
    if (handle.endpoint.empty()) {
      throw Error(ErrorCode::BackendUnknown, "fine-tuned backend '" + handle.artifact_ref + "' has no endpoint");
    }
    gateway.register_backend(handle.artifact_ref, std::make_shared<RemoteBackend>(RemoteBackendConfig::from_env(
                                                      handle.artifact_ref, handle.artifact_ref, handle.endpoint)));
  }
  return std::make_shared<ModelContextSource>(gateway, handle.artifact_ref);
}

std::vector<IterationReport> run_flywheel(const FlywheelSettings& settings, std::shared_ptr<ContextSource> initial,
                                          std::shared_ptr<ContextSource> first_sampler, TrajectoryBuffer& buffer,
                                          Gateway& gateway, const EnvironmentFactory& make_env) {
  if (settings.iterations < 1) throw Error(ErrorCode::ConfigError, "iterations must be at least 1");
  if (!first_sampler) first_sampler = initial;
  if (!first_sampler) throw Error(ErrorCode::ConfigError, "mining needs a contextualizer source");

  std::vector<IterationReport> reports;
  std::shared_ptr<ContextSource> current = first_sampler;
  std::shared_ptr<ContextSource> deployed = initial;
  for (int i = 1; i <= settings.iterations; ++i) {
    ContextSource* collect_ctx = settings.collect_with_contextualizer ? deployed.get() : nullptr;
    reports.push_back(run_iteration(settings, i, *current, collect_ctx, buffer, gateway, make_env));
    current = context_from_handle(*reports.back().trainer, gateway, initial);
    deployed = current;
  }
  return reports;
}

}  // namespace lensloop
