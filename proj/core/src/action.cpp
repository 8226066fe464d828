#include "lensloop/action.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <system_error>

#include "lensloop/error.hpp"
#include "text_util.hpp"

namespace lensloop {

namespace {

enum class ParamType { String, Number, StringOrList, Button, Modifiers, BracketText };

struct ParamSpec {
  std::string_view name;
  ParamType type;
  std::optional<ArgValue> default_value;
  // Defaulted parameters render as keywords unless this is set.
  bool positional_default = false;
};

struct KindSpec {
  ActionKind kind;
  std::string_view verb;
  std::vector<ParamSpec> params;
};

const std::vector<KindSpec>& kind_specs() {
  static const std::vector<KindSpec> kSpecs = [] {
    const ParamSpec bid{"bid", ParamType::String, std::nullopt};
    const ParamSpec button{"button", ParamType::Button, ArgValue{MouseButton::Left}};
    const ParamSpec modifiers{"modifiers", ParamType::Modifiers, ArgValue{ModifierList{}}};
    return std::vector<KindSpec>{
        {ActionKind::Noop, "noop", {{"wait_ms", ParamType::Number, ArgValue{1000.0}, true}}},
        {ActionKind::SendMsgToUser, "send_msg_to_user", {{"text", ParamType::String, std::nullopt}}},
        {ActionKind::Scroll,
         "scroll",
         {{"delta_x", ParamType::Number, std::nullopt}, {"delta_y", ParamType::Number, std::nullopt}}},
        {ActionKind::Fill, "fill", {bid, {"value", ParamType::String, std::nullopt}}},
        {ActionKind::SelectOption, "select_option", {bid, {"options", ParamType::StringOrList, std::nullopt}}},
        {ActionKind::Click, "click", {bid, button, modifiers}},
        {ActionKind::DblClick, "dblclick", {bid, button, modifiers}},
        {ActionKind::Hover, "hover", {bid}},
        {ActionKind::Press, "press", {bid, {"key_comb", ParamType::String, std::nullopt}}},
        {ActionKind::Focus, "focus", {bid}},
        {ActionKind::Clear, "clear", {bid}},
        {ActionKind::DragAndDrop,
         "drag_and_drop",
         {{"from_bid", ParamType::String, std::nullopt}, {"to_bid", ParamType::String, std::nullopt}}},
        {ActionKind::UploadFile, "upload_file", {bid, {"file", ParamType::StringOrList, std::nullopt}}},
        {ActionKind::Search, "search", {{"query", ParamType::BracketText, std::nullopt}}},
        {ActionKind::BracketClick, "click", {{"target", ParamType::BracketText, std::nullopt}}},
    };
  }();
  return kSpecs;
}

const KindSpec& spec_for(ActionKind kind) {
  const auto& specs = kind_specs();
  return specs[static_cast<std::size_t>(kind)];
}

[[noreturn]] void malformed(const std::string& message) { throw Error(ErrorCode::MalformedArgs, message); }

bool type_accepts(ParamType type, const ArgValue& value) {
  switch (type) {
    case ParamType::String:
    case ParamType::BracketText:
      return std::holds_alternative<std::string>(value);
    case ParamType::Number:
      return std::holds_alternative<double>(value) && std::isfinite(std::get<double>(value));
    case ParamType::StringOrList:
      return std::holds_alternative<std::string>(value) || std::holds_alternative<StringList>(value);
    case ParamType::Button:
      return std::holds_alternative<MouseButton>(value);
    case ParamType::Modifiers:
      return std::holds_alternative<ModifierList>(value);
  }
  return false;
}

bool bracket_text_ok(std::string_view text) {
  return !text.empty() && text.find_first_of("]\n\r") == std::string_view::npos &&
         text.front() != ' ' && text.back() != ' ' && text.front() != '\t' && text.back() != '\t';
}

std::optional<MouseButton> button_from_string(std::string_view name) {
  if (name == "left") return MouseButton::Left;
  if (name == "middle") return MouseButton::Middle;
  if (name == "right") return MouseButton::Right;
  return std::nullopt;
}

std::optional<Modifier> modifier_from_string(std::string_view name) {
  if (name == "Alt") return Modifier::Alt;
  if (name == "Control") return Modifier::Control;
  if (name == "Meta") return Modifier::Meta;
  if (name == "Shift") return Modifier::Shift;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Browser-dialect call syntax: verb(arg, ..., name=arg, ...)

struct RawValue {
  std::variant<std::string, double, StringList> value;
};

struct RawArg {
  std::optional<std::string> keyword;
  RawValue value;
};

class CallParser {
 public:
  explicit CallParser(std::string_view text) : text_(text) {}

  std::vector<RawArg> parse_args() {
    std::vector<RawArg> args;
    skip_ws();
    expect('(');
    skip_ws();
    if (peek() == ')') {
      ++pos_;
      finish();
      return args;
    }
    while (true) {
      args.push_back(parse_arg());
      skip_ws();
      const char c = take();
      if (c == ')') break;
      if (c != ',') malformed("expected ',' or ')' in argument list");
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        break;
      }
    }
    finish();
    return args;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  char take() {
    if (pos_ >= text_.size()) malformed("unexpected end of action");
    return text_[pos_++];
  }
  void expect(char c) {
    if (take() != c) malformed(std::string("expected '") + c + "'");
  }
  void skip_ws() {
    while (pos_ < text_.size() && text::is_space(text_[pos_])) ++pos_;
  }
  void finish() {
    skip_ws();
    if (pos_ != text_.size()) malformed("trailing characters after ')'");
  }

  RawArg parse_arg() {
    RawArg arg;
    const std::size_t start = pos_;
    if (text::is_ident_start(peek())) {
      std::size_t end = pos_;
      while (end < text_.size() && text::is_ident_char(text_[end])) ++end;
      std::size_t after = end;
      while (after < text_.size() && text::is_space(text_[after])) ++after;
      if (after < text_.size() && text_[after] == '=') {
        arg.keyword = std::string(text_.substr(start, end - start));
        pos_ = after + 1;
        skip_ws();
      } else {
        malformed("bare identifier '" + std::string(text_.substr(start, end - start)) + "' is not a value");
      }
    }
    arg.value = parse_value();
    return arg;
  }

  RawValue parse_value() {
    const char c = peek();
    if (c == '\'' || c == '"') return RawValue{parse_string()};
    if (c == '[') return RawValue{parse_list()};
    if (c == '-' || c == '+' || c == '.' || (c >= '0' && c <= '9')) return RawValue{parse_number()};
    malformed("expected a string, number or list");
  }

  std::string parse_string() {
    const char quote = take();
    std::string out;
    while (true) {
      const char c = take();
      if (c == quote) return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      const char e = take();
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case 't': out.push_back('\t'); break;
        case '\\': out.push_back('\\'); break;
        case '\'': out.push_back('\''); break;
        case '"': out.push_back('"'); break;
        default:
          // Unknown escapes keep the backslash, as Python does.
          out.push_back('\\');
          out.push_back(e);
      }
    }
  }

  StringList parse_list() {
    expect('[');
    StringList out;
    skip_ws();
    if (peek() == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      if (peek() != '\'' && peek() != '"') malformed("list elements must be strings");
      out.push_back(parse_string());
      skip_ws();
      const char c = take();
      if (c == ']') return out;
      if (c != ',') malformed("expected ',' or ']' in list");
      skip_ws();
      if (peek() == ']') {
        ++pos_;
        return out;
      }
    }
  }

  double parse_number() {
    std::size_t end = pos_;
    while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                                  text_[end] == '-' || text_[end] == '+')) {
      ++end;
    }
    std::string_view token = text_.substr(pos_, end - pos_);
    std::string_view digits = token;
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    double value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || !std::isfinite(value)) {
      malformed("invalid number '" + std::string(token) + "'");
    }
    pos_ = end;
    return value;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

ArgValue convert(const KindSpec& spec, const ParamSpec& param, const RawValue& raw) {
  const auto bad = [&] {
    malformed(std::string(spec.verb) + ": argument '" + std::string(param.name) + "' has the wrong type");
  };
  switch (param.type) {
    case ParamType::String:
    case ParamType::BracketText:
      if (!std::holds_alternative<std::string>(raw.value)) bad();
      return std::get<std::string>(raw.value);
    case ParamType::Number:
      if (!std::holds_alternative<double>(raw.value)) bad();
      return std::get<double>(raw.value);
    case ParamType::StringOrList:
      if (std::holds_alternative<std::string>(raw.value)) return std::get<std::string>(raw.value);
      if (std::holds_alternative<StringList>(raw.value)) return std::get<StringList>(raw.value);
      bad();
      break;
    case ParamType::Button: {
      if (!std::holds_alternative<std::string>(raw.value)) bad();
      const auto button = button_from_string(std::get<std::string>(raw.value));
      if (!button) malformed("unknown mouse button '" + std::get<std::string>(raw.value) + "'");
      return *button;
    }
    case ParamType::Modifiers: {
      if (!std::holds_alternative<StringList>(raw.value)) bad();
      ModifierList mods;
      for (const auto& name : std::get<StringList>(raw.value)) {
        const auto mod = modifier_from_string(name);
        if (!mod) malformed("unknown modifier '" + name + "'");
        mods.push_back(*mod);
      }
      return mods;
    }
  }
  bad();
  return {};
}

Action parse_browser(std::string_view text) {
  std::size_t end = 0;
  while (end < text.size() && text::is_ident_char(text[end])) ++end;
  const std::string_view name = text.substr(0, end);
  const auto kind = kind_from_verb(name, ActionDialect::Browser);
  if (name.empty() || !kind) throw Error(ErrorCode::UnknownAction, "'" + std::string(name) + "' is not a browser action");
  const KindSpec& spec = spec_for(*kind);

  CallParser parser(text.substr(end));
  const std::vector<RawArg> raw = parser.parse_args();

  Action action{*kind, {}};
  std::size_t positional = 0;
  bool seen_keyword = false;
  for (const auto& arg : raw) {
    const ParamSpec* param = nullptr;
    if (arg.keyword) {
      seen_keyword = true;
      for (const auto& p : spec.params) {
        if (p.name == *arg.keyword) param = &p;
      }
      if (!param) malformed(std::string(spec.verb) + ": unexpected keyword '" + *arg.keyword + "'");
    } else {
      if (seen_keyword) malformed("positional argument after keyword argument");
      if (positional >= spec.params.size()) malformed(std::string(spec.verb) + ": too many arguments");
      param = &spec.params[positional++];
    }
    if (action.find(param->name)) {
      malformed(std::string(spec.verb) + ": argument '" + std::string(param->name) + "' given twice");
    }
    action.args.push_back({std::string(param->name), convert(spec, *param, arg.value)});
  }
  return normalize(action);
}

Action parse_shop(std::string_view text) {
  std::size_t end = 0;
  while (end < text.size() && text::is_ident_char(text[end])) ++end;
  const std::string_view name = text.substr(0, end);
  const auto kind = kind_from_verb(name, ActionDialect::Shop);
  if (name.empty() || !kind) throw Error(ErrorCode::UnknownAction, "'" + std::string(name) + "' is not a shop action");

  std::string_view rest = text::trim(text.substr(end));
  if (rest.size() < 2 || rest.front() != '[' || rest.back() != ']') {
    malformed(std::string(name) + ": expected " + std::string(name) + "[...]");
  }
  const std::string_view inner = text::trim(rest.substr(1, rest.size() - 2));
  if (inner.find(']') != std::string_view::npos) malformed("']' is not allowed inside brackets");
  if (inner.empty()) malformed(std::string(name) + ": empty brackets");
  if (inner.find_first_of("\n\r") != std::string_view::npos) malformed("bracket text must be a single line");

  const KindSpec& spec = spec_for(*kind);
  return Action{*kind, {{std::string(spec.params.front().name), std::string(inner)}}};
}

void append_quoted(std::string& out, std::string_view value) {
  out.push_back('\'');
  for (const char c : value) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\'': out += "\\'"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('\'');
}

void append_value(std::string& out, const ArgValue& value) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          append_quoted(out, v);
        } else if constexpr (std::is_same_v<T, double>) {
          out += format_number(v);
        } else if constexpr (std::is_same_v<T, StringList>) {
          out.push_back('[');
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ", ";
            append_quoted(out, v[i]);
          }
          out.push_back(']');
        } else if constexpr (std::is_same_v<T, MouseButton>) {
          append_quoted(out, to_string(v));
        } else {
          out.push_back('[');
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ", ";
            append_quoted(out, to_string(v[i]));
          }
          out.push_back(']');
        }
      },
      value);
}

}  // namespace

const ArgValue* Action::find(std::string_view name) const {
  for (const auto& arg : args) {
    if (arg.name == name) return &arg.value;
  }
  return nullptr;
}

const std::string& Action::text(std::string_view name) const {
  const ArgValue* value = find(name);
  if (!value || !std::holds_alternative<std::string>(*value)) {
    throw Error(ErrorCode::MalformedArgs, "missing string argument '" + std::string(name) + "'");
  }
  return std::get<std::string>(*value);
}

std::string_view verb(ActionKind kind) noexcept { return spec_for(kind).verb; }

std::string_view to_string(ActionDialect dialect) noexcept {
  return dialect == ActionDialect::Browser ? "browser" : "shop";
}

std::string_view to_string(MouseButton button) noexcept {
  switch (button) {
    case MouseButton::Left: return "left";
    case MouseButton::Middle: return "middle";
    case MouseButton::Right: return "right";
  }
  return "left";
}

std::string_view to_string(Modifier modifier) noexcept {
  switch (modifier) {
    case Modifier::Alt: return "Alt";
    case Modifier::Control: return "Control";
    case Modifier::Meta: return "Meta";
    case Modifier::Shift: return "Shift";
  }
  return "Alt";
}

std::optional<ActionDialect> dialect_from_string(std::string_view name) noexcept {
  if (name == "browser" || name == "Browser") return ActionDialect::Browser;
  if (name == "shop" || name == "Shop") return ActionDialect::Shop;
  return std::nullopt;
}

std::optional<ActionKind> kind_from_verb(std::string_view name, ActionDialect dialect) noexcept {
  for (const auto& spec : kind_specs()) {
    if (spec.verb == name && dialect_of(spec.kind) == dialect) return spec.kind;
  }
  return std::nullopt;
}

ActionDialect dialect_of(ActionKind kind) noexcept {
  return kind == ActionKind::Search || kind == ActionKind::BracketClick ? ActionDialect::Shop
                                                                        : ActionDialect::Browser;
}

const std::vector<ActionKind>& all_action_kinds() {
  static const std::vector<ActionKind> kKinds = [] {
    std::vector<ActionKind> out;
    for (const auto& spec : kind_specs()) out.push_back(spec.kind);
    return out;
  }();
  return kKinds;
}

void validate(const Action& action) {
  const KindSpec& spec = spec_for(action.kind);
  for (const auto& arg : action.args) {
    const auto it = std::find_if(spec.params.begin(), spec.params.end(),
                                 [&](const ParamSpec& p) { return p.name == arg.name; });
    if (it == spec.params.end()) malformed(std::string(spec.verb) + ": unexpected argument '" + arg.name + "'");
    if (!type_accepts(it->type, arg.value)) {
      malformed(std::string(spec.verb) + ": argument '" + arg.name + "' has the wrong type");
    }
    if (it->type == ParamType::BracketText && !bracket_text_ok(text::trim(std::get<std::string>(arg.value)))) {
      malformed(std::string(spec.verb) + ": bracket text must be non-empty, single-line and free of ']'");
    }
    const auto count = std::count_if(action.args.begin(), action.args.end(),
                                     [&](const ActionArg& a) { return a.name == arg.name; });
    if (count != 1) malformed(std::string(spec.verb) + ": argument '" + arg.name + "' given twice");
  }
  for (const auto& param : spec.params) {
    if (!param.default_value && !action.find(param.name)) {
      malformed(std::string(spec.verb) + ": missing argument '" + std::string(param.name) + "'");
    }
  }
}

Action normalize(const Action& action) {
  validate(action);
  const KindSpec& spec = spec_for(action.kind);
  Action out{action.kind, {}};
  out.args.reserve(spec.params.size());
  for (const auto& param : spec.params) {
    const ArgValue* given = action.find(param.name);
    ArgValue value = given ? *given : *param.default_value;
    if (param.type == ParamType::Modifiers) {
      auto& mods = std::get<ModifierList>(value);
      std::sort(mods.begin(), mods.end());
      mods.erase(std::unique(mods.begin(), mods.end()), mods.end());
    } else if (param.type == ParamType::BracketText) {
      value = std::string(text::trim(std::get<std::string>(value)));
    }
    out.args.push_back({std::string(param.name), std::move(value)});
  }
  return out;
}

Action parse_action(std::string_view input, ActionDialect dialect) {
  const std::string_view text = text::trim(input);
  if (text.empty()) throw Error(ErrorCode::EmptyInput, "empty action text");
  return dialect == ActionDialect::Browser ? parse_browser(text) : parse_shop(text);
}

std::string render_action(const Action& action, ActionDialect dialect) {
  if (dialect_of(action.kind) != dialect) {
    throw Error(ErrorCode::DialectMismatch, std::string(verb(action.kind)) + " is not a " +
                                                std::string(to_string(dialect)) + " action");
  }
  const Action norm = normalize(action);
  const KindSpec& spec = spec_for(norm.kind);
  std::string out(spec.verb);

  if (dialect == ActionDialect::Shop) {
    out.push_back('[');
    out += std::get<std::string>(norm.args.front().value);
    out.push_back(']');
    return out;
  }

  out.push_back('(');
  bool first = true;
  for (std::size_t i = 0; i < spec.params.size(); ++i) {
    const ParamSpec& param = spec.params[i];
    const ArgValue& value = norm.args[i].value;
    if (param.default_value && *param.default_value == value) continue;
    if (!first) out += ", ";
    first = false;
    if (param.default_value && !param.positional_default) {
      out += param.name;
      out.push_back('=');
    }
    append_value(out, value);
  }
  out.push_back(')');
  return out;
}

std::string render_action(const Action& action) { return render_action(action, dialect_of(action.kind)); }

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) return "0";
  return std::string(buf.data(), ptr);
}

namespace actions {

Action noop(double wait_ms) { return normalize({ActionKind::Noop, {{"wait_ms", wait_ms}}}); }
Action send_msg_to_user(std::string text) {
  return normalize({ActionKind::SendMsgToUser, {{"text", std::move(text)}}});
}
Action scroll(double delta_x, double delta_y) {
  return normalize({ActionKind::Scroll, {{"delta_x", delta_x}, {"delta_y", delta_y}}});
}
Action fill(std::string bid, std::string value) {
  return normalize({ActionKind::Fill, {{"bid", std::move(bid)}, {"value", std::move(value)}}});
}
Action select_option(std::string bid, std::string option) {
  return normalize({ActionKind::SelectOption, {{"bid", std::move(bid)}, {"options", std::move(option)}}});
}
Action select_option(std::string bid, StringList options) {
  return normalize({ActionKind::SelectOption, {{"bid", std::move(bid)}, {"options", std::move(options)}}});
}
Action click(std::string bid, MouseButton button, ModifierList modifiers) {
  return normalize(
      {ActionKind::Click, {{"bid", std::move(bid)}, {"button", button}, {"modifiers", std::move(modifiers)}}});
}
Action dblclick(std::string bid, MouseButton button, ModifierList modifiers) {
  return normalize(
      {ActionKind::DblClick, {{"bid", std::move(bid)}, {"button", button}, {"modifiers", std::move(modifiers)}}});
}
Action hover(std::string bid) { return normalize({ActionKind::Hover, {{"bid", std::move(bid)}}}); }
Action press(std::string bid, std::string key_comb) {
  return normalize({ActionKind::Press, {{"bid", std::move(bid)}, {"key_comb", std::move(key_comb)}}});
}
Action focus(std::string bid) { return normalize({ActionKind::Focus, {{"bid", std::move(bid)}}}); }
Action clear(std::string bid) { return normalize({ActionKind::Clear, {{"bid", std::move(bid)}}}); }
Action drag_and_drop(std::string from_bid, std::string to_bid) {
  return normalize({ActionKind::DragAndDrop, {{"from_bid", std::move(from_bid)}, {"to_bid", std::move(to_bid)}}});
}
Action upload_file(std::string bid, std::string file) {
  return normalize({ActionKind::UploadFile, {{"bid", std::move(bid)}, {"file", std::move(file)}}});
}
Action upload_file(std::string bid, StringList files) {
  return normalize({ActionKind::UploadFile, {{"bid", std::move(bid)}, {"file", std::move(files)}}});
}
Action search(std::string query) { return normalize({ActionKind::Search, {{"query", std::move(query)}}}); }
Action bracket_click(std::string target) {
  return normalize({ActionKind::BracketClick, {{"target", std::move(target)}}});
}

}  // namespace actions

}  // namespace lensloop
