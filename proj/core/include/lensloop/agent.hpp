#pragma once

#include <string>
#include <string_view>

#include "lensloop/action.hpp"
#include "lensloop/prompts.hpp"

namespace lensloop {

class Gateway;

enum class ObservationMode { Raw, Contextualized };

std::string_view to_string(ObservationMode mode) noexcept;
std::optional<ObservationMode> observation_mode_from_string(std::string_view name) noexcept;

struct AgentTurn {
  std::string think;
  Action action;
  std::string raw_text;
};

/// Browser dialect uses the action-space prompt; Shop dialect uses the ReAct
/// few-shot prompt. Raw mode swaps the refined-observation header for a plain
/// observation header.
Prompt build_agent_prompt(std::string_view goal, std::string_view history, std::string_view observation_text,
                          ActionDialect dialect, ObservationMode mode);

/// Extracts the action from a completion: the first <action> block, or for
/// the Shop dialect the first "Action:" line (or a bare single-line action).
/// Throws UnparsableAction carrying the raw text.
AgentTurn parse_agent_turn(std::string_view text, ActionDialect dialect);

/// Fetches a completion at temperature 0 and parses it.
AgentTurn decide(Gateway& gateway, const std::string& backend_id, const Prompt& prompt, ActionDialect dialect);

}  // namespace lensloop
