#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lensloop {

/// A system/user message pair handed to a chat backend.
struct Prompt {
  std::string system;
  std::string user;

  bool operator==(const Prompt&) const = default;
};

namespace prompts {

inline constexpr std::string_view kContextualizer = "contextualizer";
inline constexpr std::string_view kContextualizerRetry = "contextualizer_retry";
inline constexpr std::string_view kSelfContextualizer = "self_contextualizer";
inline constexpr std::string_view kAgentBrowser = "agent_browser";
inline constexpr std::string_view kAgentShop = "agent_shop";
inline constexpr std::string_view kJudge = "judge";

/// Template text for `<name>.system.txt` / `<name>.user.txt`. A template
/// without a system part yields an empty system string.
std::string_view system_template(std::string_view name);
std::string_view user_template(std::string_view name);

using Bindings = std::vector<std::pair<std::string_view, std::string_view>>;

/// Single-pass substitution of `{placeholder}` tokens. Substituted text is not
/// rescanned, and braces that do not name a binding are copied verbatim.
std::string fill(std::string_view tmpl, const Bindings& bindings);

}  // namespace prompts

}  // namespace lensloop
