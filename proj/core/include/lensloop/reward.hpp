#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lensloop/action.hpp"
#include "lensloop/contextualizer.hpp"
#include "lensloop/prompts.hpp"
#include "lensloop/records.hpp"

namespace lensloop {

class Gateway;

struct EnsembleConfig {
  std::vector<std::string> agent_backends;  // K >= 1, scoring order
  std::optional<std::string> judge_backend;
  std::set<ActionKind> open_ended_kinds{ActionKind::SendMsgToUser, ActionKind::Fill};

  std::size_t size() const { return agent_backends.size(); }
};

/// Per-agent audit trail behind one entry of per_agent_scores.
struct AgentVerdict {
  std::string predicted;  // rendered action, empty when the agent output was unparsable
  std::string error;      // parse, transport or judge error, empty otherwise
  bool judged = false;    // the judge decided this match
};

struct CandidateRecord {
  StepRef step_ref;
  ContextualizedObservation candidate;
  int multiplicity = 1;
  std::vector<int> per_agent_scores;
  int reward = 0;
  bool from_retry = false;
  std::vector<AgentVerdict> verdicts;
};

void to_json(nlohmann::json& j, const CandidateRecord& r);
void from_json(const nlohmann::json& j, CandidateRecord& r);

/// Inputs shared by all candidates of one step.
struct StepContext {
  std::string goal;
  std::string history;
  Action reference;
  ActionDialect dialect = ActionDialect::Shop;
};

Prompt build_judge_prompt(const Action& reference, const Action& predicted);

/// Integer after the final "[RESULT]" marker; anything other than 0 or 1
/// throws JudgeUnparsable.
int parse_judge_result(std::string_view text);

/// 1 when the predicted action matches the reference. Kinds must agree;
/// open-ended kinds go to the judge when one is given, everything else uses
/// normalized structural equality.
int action_match(const Action& predicted, const Action& reference, const std::optional<std::string>& judge_backend,
                 Gateway* gateway, const std::set<ActionKind>& open_ended_kinds = {ActionKind::SendMsgToUser,
                                                                                    ActionKind::Fill});

/// Asks every ensemble agent to act on the candidate's extraction and scores
/// each decision against the reference action. Per-agent failures score 0.
CandidateRecord score_candidate(Gateway& gateway, const Candidate& candidate, const StepContext& step,
                                const EnsembleConfig& config, const StepRef& step_ref, bool from_retry);

struct Selection {
  enum class Kind { Selected, RetryRequired };

  Kind kind = Kind::Selected;
  std::size_t index = 0;

  static Selection selected(std::size_t i) { return {Kind::Selected, i}; }
  static Selection retry() { return {Kind::RetryRequired, 0}; }
  bool operator==(const Selection&) const = default;
};

/// Lowest-index argmax of reward, or RetryRequired when every reward is zero
/// and no record comes from a retry round.
Selection select_best(std::span<const CandidateRecord> records);

}  // namespace lensloop
