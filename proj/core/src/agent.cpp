#include "lensloop/agent.hpp"

#include "lensloop/error.hpp"
#include "lensloop/gateway.hpp"
#include "text_util.hpp"

namespace lensloop {

namespace {

constexpr std::string_view kRefinedHeader = "# Refined observation of current step:";
constexpr std::string_view kRawHeader = "# Observation of current step:";

[[noreturn]] void unparsable(std::string_view text, const std::string& why) {
  throw Error(ErrorCode::UnparsableAction, why).with_raw_text(std::string(text));
}

// Models often wrap the action in a fenced code block.
std::string_view strip_fences(std::string_view s) {
  s = text::trim(s);
  if (text::starts_with(s, "```")) {
    const auto nl = s.find('\n');
    s = nl == std::string_view::npos ? std::string_view{} : s.substr(nl + 1);
    const auto close = s.rfind("```");
    if (close != std::string_view::npos) s = s.substr(0, close);
  } else if (s.size() >= 2 && s.front() == '`' && s.back() == '`') {
    s = s.substr(1, s.size() - 2);
  }
  return text::trim(s);
}

Action parse_or_fail(std::string_view full, std::string_view candidate, ActionDialect dialect) {
  try {
    return parse_action(strip_fences(candidate), dialect);
  } catch (const Error& e) {
    unparsable(full, e.what());
  }
}

}  // namespace

std::string_view to_string(ObservationMode mode) noexcept {
  return mode == ObservationMode::Raw ? "Raw" : "Contextualized";
}

std::optional<ObservationMode> observation_mode_from_string(std::string_view name) noexcept {
  if (name == "Raw" || name == "raw") return ObservationMode::Raw;
  if (name == "Contextualized" || name == "contextualized") return ObservationMode::Contextualized;
  return std::nullopt;
}

Prompt build_agent_prompt(std::string_view goal, std::string_view history, std::string_view observation_text,
                          ActionDialect dialect, ObservationMode mode) {
  if (dialect == ActionDialect::Shop) {
    const prompts::Bindings bindings{{"instruction", goal},
                                     {"History of observations and actions", history},
                                     {"observation", observation_text}};
    return Prompt{std::string(prompts::system_template(prompts::kAgentShop)),
                  prompts::fill(prompts::user_template(prompts::kAgentShop), bindings)};
  }

  std::string tmpl(prompts::user_template(prompts::kAgentBrowser));
  if (mode == ObservationMode::Raw) {
    const auto at = tmpl.find(kRefinedHeader);
    if (at != std::string::npos) tmpl.replace(at, kRefinedHeader.size(), kRawHeader);
  }
  const prompts::Bindings bindings{
      {"goal", goal}, {"history", history}, {"refined observation", observation_text}};
  return Prompt{std::string(prompts::system_template(prompts::kAgentBrowser)), prompts::fill(tmpl, bindings)};
}

AgentTurn parse_agent_turn(std::string_view text, ActionDialect dialect) {
  AgentTurn turn;
  turn.raw_text = std::string(text);

  if (const auto open = text.find("<think>"); open != std::string_view::npos) {
    const auto body = open + 7;
    const auto close = text.find("</think>", body);
    turn.think = std::string(text::trim(text.substr(body, close == std::string_view::npos ? close : close - body)));
  }

  if (const auto open = text.find("<action>"); open != std::string_view::npos) {
    const auto body = open + 8;
    const auto close = text.find("</action>", body);
    turn.action = parse_or_fail(text, text.substr(body, close == std::string_view::npos ? close : close - body), dialect);
    return turn;
  }

  if (dialect == ActionDialect::Shop) {
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      const std::string_view line =
          text::trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
      if (text::starts_with(line, "Action:")) {
        turn.action = parse_or_fail(text, line.substr(7), dialect);
        return turn;
      }
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
    const std::string_view whole = text::trim(text);
    if (!whole.empty() && whole.find('\n') == std::string_view::npos) {
      turn.action = parse_or_fail(text, whole, dialect);
      return turn;
    }
  }
  unparsable(text, "no action found in completion");
}

AgentTurn decide(Gateway& gateway, const std::string& backend_id, const Prompt& prompt, ActionDialect dialect) {
  const std::string text =
      gateway.complete(ChatRequest{prompt.system, prompt.user, 0.0, gateway.options().max_tokens, backend_id});
  return parse_agent_turn(text, dialect);
}

}  // namespace lensloop
