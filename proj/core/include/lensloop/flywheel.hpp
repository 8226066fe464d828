#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lensloop/context_source.hpp"
#include "lensloop/environment.hpp"
#include "lensloop/records.hpp"
#include "lensloop/reward.hpp"
#include "lensloop/rollout.hpp"
#include "lensloop/trainer.hpp"

namespace lensloop {

class Gateway;

/// Successful trajectories, deduplicated by (task id, action-sequence hash).
/// With a path, the buffer is loaded from and appended to that store file.
class TrajectoryBuffer {
 public:
  TrajectoryBuffer() = default;
  explicit TrajectoryBuffer(std::filesystem::path path);

  struct AddResult {
    std::size_t added = 0;
    std::size_t duplicates = 0;
  };

  /// Throws NonSuccessfulDemo (with offending indices) if any trajectory has
  /// final_reward below 1; nothing is added in that case.
  AddResult add(std::span<const Trajectory> trajectories);

  const std::vector<Trajectory>& trajectories() const { return items_; }
  std::size_t size() const { return items_.size(); }
  const std::filesystem::path& path() const { return path_; }

  static std::string dedup_key(const Trajectory& trajectory);

 private:
  std::filesystem::path path_;
  std::vector<Trajectory> items_;
  std::set<std::string> keys_;
};

struct CollectResult {
  std::vector<Trajectory> successful;
  std::size_t attempted = 0;
  std::size_t failed = 0;  // episodes ending below reward 1, including aborted ones
};

/// Runs one episode per task over fresh environments, up to `parallelism`
/// at a time. `ctx` may be null for raw-observation rollouts.
CollectResult collect_trajectories(std::span<const Task> tasks, const std::string& agent_backend, ContextSource* ctx,
                                   const EnvironmentFactory& make_env, Gateway& gateway, int iteration,
                                   int parallelism = 1);

/// Loads a trajectory store file, rejects non-successful demos and adds the
/// rest to the buffer with iteration 0.
TrajectoryBuffer::AddResult ingest_seed_demonstrations(const std::filesystem::path& path, TrajectoryBuffer& buffer);

struct MineOptions {
  int n = 5;
  double temperature = 0.7;
  bool keep_zero_reward_retry = true;
};

struct MineResult {
  std::vector<SftRecord> records;
  std::vector<CandidateRecord> candidates;
  std::size_t steps_total = 0;
  std::size_t steps_mined = 0;
  std::size_t retries = 0;
  std::size_t skipped_unparsable = 0;
  std::size_t dropped = 0;  // zero-reward retry winners dropped by policy
};

/// Samples, scores and selects a contextualization for every step of every
/// trajectory, retrying once with the ground-truth hint when every first-round
/// reward is zero.
MineResult mine_dataset(std::span<const Trajectory> trajectories, ContextSource& ctx, const EnsembleConfig& ensemble,
                        Gateway& gateway, const MineOptions& options);

struct FlywheelSettings {
  std::filesystem::path run_dir;
  std::vector<Task> train_tasks;
  std::string agent_backend;
  EnsembleConfig ensemble;
  MineOptions mine;
  TrainerSpec trainer;  // output_dir is set per iteration
  int iterations = 1;
  int episode_parallelism = 1;
  bool collect_with_contextualizer = false;
  std::string config_hash;
};

struct IterationReport {
  int iteration = 0;
  bool ok = false;
  std::string error;
  std::size_t episodes_attempted = 0;
  std::size_t episodes_succeeded = 0;
  std::size_t buffer_size = 0;
  std::size_t steps_total = 0;
  std::size_t steps_mined = 0;
  std::size_t retries = 0;
  std::size_t skipped_unparsable = 0;
  std::size_t dropped = 0;
  std::size_t dataset_size = 0;
  std::string ctx_source;
  std::optional<TrainerHandle> trainer;
  std::filesystem::path manifest_path;
  std::filesystem::path dataset_path;
  std::filesystem::path candidates_path;
};

std::filesystem::path iteration_dir(const std::filesystem::path& run_dir, int iteration);

/// Collect, mine and fit for one iteration, writing iter_<i>/ under the run
/// directory. A failure still writes the manifest (status "failed") and keeps
/// whatever artifacts were produced, then rethrows.
IterationReport run_iteration(const FlywheelSettings& settings, int iteration, ContextSource& mine_ctx,
                              ContextSource* collect_ctx, TrajectoryBuffer& buffer, Gateway& gateway,
                              const EnvironmentFactory& make_env);

/// Context source backed by a trainer result. Exemplar stores fall back to
/// `fallback`; ExternalSft registers the fine-tuned model with the gateway.
std::shared_ptr<ContextSource> context_from_handle(const TrainerHandle& handle, Gateway& gateway,
                                                   std::shared_ptr<ContextSource> fallback);

/// Chains settings.iterations iterations. Iteration 1 mines with
/// `first_sampler`; each later one with the previous iteration's trainer
/// artifact, falling back to `initial` for unseen observations.
std::vector<IterationReport> run_flywheel(const FlywheelSettings& settings, std::shared_ptr<ContextSource> initial,
                                          std::shared_ptr<ContextSource> first_sampler, TrajectoryBuffer& buffer,
                                          Gateway& gateway, const EnvironmentFactory& make_env);

nlohmann::json manifest_json(const IterationReport& report, const FlywheelSettings& settings);

}  // namespace lensloop
