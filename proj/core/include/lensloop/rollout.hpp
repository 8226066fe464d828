#pragma once

#include <string>

#include "lensloop/agent.hpp"
#include "lensloop/context_source.hpp"
#include "lensloop/environment.hpp"
#include "lensloop/records.hpp"

namespace lensloop {

class Gateway;

struct EpisodeResult {
  Trajectory trajectory;
  int steps = 0;
  std::string error;  // empty when the episode ran to termination
};

/// Rolls one task to termination or the step limit. With a context source the
/// agent sees the top candidate's extraction (one greedy sample per step);
/// without one it sees the raw observation. An unparsable agent turn is asked
/// once more; a second failure ends the episode with reward 0.
EpisodeResult run_episode(const Task& task, Environment& env, Gateway& gateway, const std::string& agent_backend,
                          ContextSource* ctx, int iteration);

/// Deterministic trajectory id from the task id and the rendered actions.
std::string trajectory_id(const Task& task, std::span<const Action> actions, ActionDialect dialect);

/// SHA-256 of the rendered actions joined by newlines.
std::string action_sequence_hash(std::span<const Action> actions, ActionDialect dialect);

}  // namespace lensloop
