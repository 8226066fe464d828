#include "lensloop/rollout.hpp"

#include "lensloop/error.hpp"
#include "lensloop/gateway.hpp"
#include "lensloop/hashing.hpp"

namespace lensloop {

std::string action_sequence_hash(std::span<const Action> actions, ActionDialect dialect) {
  std::string joined;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i) joined.push_back('\n');
    joined += render_action(actions[i], dialect);
  }
  return sha256_hex(joined);
}

std::string trajectory_id(const Task& task, std::span<const Action> actions, ActionDialect dialect) {
  return task.id + "-" + action_sequence_hash(actions, dialect).substr(0, 12);
}

EpisodeResult run_episode(const Task& task, Environment& env, Gateway& gateway, const std::string& agent_backend,
                          ContextSource* ctx, int iteration) {
  EpisodeResult result;
  Trajectory& traj = result.trajectory;
  traj.task = task;
  traj.agent_backend = agent_backend;
  traj.iteration = iteration;
  traj.dialect = env.dialect();
  traj.domain_info = env.domain_info();

  const ObservationMode mode = ctx ? ObservationMode::Contextualized : ObservationMode::Raw;
  std::vector<Action> actions;
  try {
    Observation obs = env.reset(task);
    bool done = false;
    while (!done) {
      const std::string history = serialize_history(actions);
      TrajectoryStep step{obs, std::nullopt, Action{}};
      std::string shown = obs.text;
      if (ctx) {
        const CtxRequest request{task.instruction, history, obs.text, std::nullopt, env.domain_info()};
        const std::vector<Candidate> candidates = ctx->sample(request, 1, 0.0);
        step.contextualized = candidates.front().observation;
        shown = step.contextualized->extraction;
      }
      const Prompt prompt = build_agent_prompt(task.instruction, history, shown, env.dialect(), mode);
      AgentTurn turn;
      try {
        turn = decide(gateway, agent_backend, prompt, env.dialect());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnparsableAction) throw;
        turn = decide(gateway, agent_backend, prompt, env.dialect());
      }
      step.action = turn.action;
      actions.push_back(turn.action);
      traj.steps.push_back(std::move(step));

      const StepOutcome outcome = env.step(turn.action);
      ++result.steps;
      obs = outcome.observation;
      done = outcome.done;
      if (done) traj.final_reward = outcome.reward;
    }
  } catch (const Error& e) {
    result.error = e.what();
    traj.final_reward = 0.0;
  }
  traj.id = trajectory_id(task, actions, env.dialect());
  return result;
}

}  // namespace lensloop
