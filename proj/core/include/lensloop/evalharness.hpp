#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lensloop/agent.hpp"
#include "lensloop/context_source.hpp"
#include "lensloop/environment.hpp"
#include "lensloop/records.hpp"
#include "lensloop/reward.hpp"

namespace lensloop {

class Gateway;

struct TaskResult {
  std::string task_id;
  double reward = 0.0;
  int steps = 0;
  bool succeeded = false;
  std::string error;
};

struct EvalReport {
  double success_rate = 0.0;
  double avg_reward = 0.0;
  std::vector<TaskResult> per_task;  // in task order
  ObservationMode mode = ObservationMode::Raw;
  std::string ctx_source;  // empty in Raw mode
  std::string split_tag;

  /// Step count -> number of tasks.
  std::map<int, int> step_histogram() const;
};

/// Recomputes success_rate and avg_reward from per_task.
void finalize_metrics(EvalReport& report);

nlohmann::json to_json(const EvalReport& report);
std::string render_table(const EvalReport& report);
std::string render_histogram(const EvalReport& report);

/// One episode per task, up to `parallelism` concurrently. A null ctx means
/// Raw mode. Per-task failures count as reward 0.
EvalReport evaluate(std::span<const Task> tasks, const std::string& agent_backend, ContextSource* ctx,
                    const EnvironmentFactory& make_env, Gateway& gateway, const std::string& split_tag = {},
                    int parallelism = 1);

/// A fixed step used to compare contextualizer checkpoints.
struct HeldoutStep {
  std::string goal;
  std::string history;
  std::string observation;
  Action reference;
  ActionDialect dialect = ActionDialect::Shop;
  std::string domain_info;
  StepRef ref;
};

std::vector<HeldoutStep> heldout_from_trajectories(std::span<const Trajectory> trajectories);

struct RewardCurvePoint {
  int iteration = 0;
  std::string checkpoint;
  double avg_action_matching_reward = 0.0;
};

/// For each checkpoint, the mean over held-out steps of the best candidate's
/// ensemble reward. Points are numbered from 0 in checkpoint order.
std::vector<RewardCurvePoint> checkpoint_reward_curve(std::span<const std::shared_ptr<ContextSource>> checkpoints,
                                                      std::span<const HeldoutStep> steps,
                                                      const EnsembleConfig& ensemble, Gateway& gateway, int n,
                                                      double temperature = 0.7);

nlohmann::json to_json(const std::vector<RewardCurvePoint>& curve);

}  // namespace lensloop
