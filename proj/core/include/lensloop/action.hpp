#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lensloop {

/// Every action kind understood by either action language. Search and
/// BracketClick belong to the shopping (bracket) dialect; the rest are the
/// thirteen browser commands.
enum class ActionKind {
  Noop,
  SendMsgToUser,
  Scroll,
  Fill,
  SelectOption,
  Click,
  DblClick,
  Hover,
  Press,
  Focus,
  Clear,
  DragAndDrop,
  UploadFile,
  Search,
  BracketClick,
};

enum class ActionDialect { Browser, Shop };

enum class MouseButton { Left, Middle, Right };

// Declaration order is the canonical (sorted) order of a modifier list.
enum class Modifier { Alt, Control, Meta, Shift };

using StringList = std::vector<std::string>;
using ModifierList = std::vector<Modifier>;
using ArgValue = std::variant<std::string, double, StringList, MouseButton, ModifierList>;

struct ActionArg {
  std::string name;
  ArgValue value;

  bool operator==(const ActionArg&) const = default;
};

/// A typed action. Equality is structural; compare normalized actions to get
/// the exact-match relation used for rewards.
struct Action {
  ActionKind kind = ActionKind::Noop;
  std::vector<ActionArg> args;

  const ArgValue* find(std::string_view name) const;
  /// Returns the named string argument, or throws MalformedArgs.
  const std::string& text(std::string_view name) const;

  bool operator==(const Action&) const = default;
};

std::string_view verb(ActionKind kind) noexcept;
std::string_view to_string(ActionDialect dialect) noexcept;
std::string_view to_string(MouseButton button) noexcept;
std::string_view to_string(Modifier modifier) noexcept;
std::optional<ActionDialect> dialect_from_string(std::string_view name) noexcept;
std::optional<ActionKind> kind_from_verb(std::string_view verb, ActionDialect dialect) noexcept;
ActionDialect dialect_of(ActionKind kind) noexcept;
/// All kinds, in declaration order.
const std::vector<ActionKind>& all_action_kinds();

/// Throws MalformedArgs unless the argument list fits the kind's schema.
void validate(const Action& action);

/// Materializes defaults, orders arguments by the schema, sorts and dedupes
/// modifier lists and trims bracket text. Idempotent.
Action normalize(const Action& action);

Action parse_action(std::string_view text, ActionDialect dialect);

/// Canonical single-line rendering. Arguments equal to their default are
/// omitted. Throws DialectMismatch when the action is not in `dialect`.
std::string render_action(const Action& action, ActionDialect dialect);
std::string render_action(const Action& action);

/// Renders a double using the shortest representation that parses back to the
/// same value.
std::string format_number(double value);

namespace actions {

Action noop(double wait_ms = 1000);
Action send_msg_to_user(std::string text);
Action scroll(double delta_x, double delta_y);
Action fill(std::string bid, std::string value);
Action select_option(std::string bid, std::string option);
Action select_option(std::string bid, StringList options);
Action click(std::string bid, MouseButton button = MouseButton::Left, ModifierList modifiers = {});
Action dblclick(std::string bid, MouseButton button = MouseButton::Left, ModifierList modifiers = {});
Action hover(std::string bid);
Action press(std::string bid, std::string key_comb);
Action focus(std::string bid);
Action clear(std::string bid);
Action drag_and_drop(std::string from_bid, std::string to_bid);
Action upload_file(std::string bid, std::string file);
Action upload_file(std::string bid, StringList files);
Action search(std::string query);
Action bracket_click(std::string target);

}  // namespace actions

}  // namespace lensloop
