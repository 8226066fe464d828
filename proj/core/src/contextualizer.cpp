#include "lensloop/contextualizer.hpp"

#include <algorithm>

#include "lensloop/error.hpp"
#include "lensloop/gateway.hpp"
#include "text_util.hpp"

namespace lensloop {

namespace {

enum class Heading { Reasoning, Refined };

struct HeadingHit {
  Heading kind;
  std::size_t line_start;
  std::size_t body_start;
};

// A heading line is an optional markdown prefix (#, *, -), the heading word,
// optional emphasis and then either a colon (body may follow on the same line)
// or nothing.
std::optional<HeadingHit> detect_heading(std::string_view line, std::size_t line_start) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '#' || line[i] == '*' || line[i] == '-')) {
    ++i;
  }
  const std::string rest = text::lower(line.substr(i));
  Heading kind;
  std::size_t len = 0;
  if (text::starts_with(rest, "reasoning")) {
    kind = Heading::Reasoning;
    len = 9;
  } else if (text::starts_with(rest, "refined observation")) {
    kind = Heading::Refined;
    len = 19;
  } else {
    return std::nullopt;
  }
  std::size_t j = i + len;
  const auto skip_decor = [&] {
    while (j < line.size() && (line[j] == '*' || line[j] == ' ' || line[j] == '\t')) ++j;
  };
  skip_decor();
  if (j < line.size() && line[j] == ':') {
    ++j;
    skip_decor();
  } else if (j < line.size()) {
    return std::nullopt;
  }
  return HeadingHit{kind, line_start, line_start + j};
}

std::optional<std::string_view> tag_content(std::string_view text, std::string_view open, std::string_view close) {
  const auto start = text.find(open);
  if (start == std::string_view::npos) return std::nullopt;
  const auto body = start + open.size();
  const auto end = text.find(close, body);
  return text.substr(body, end == std::string_view::npos ? std::string_view::npos : end - body);
}

Prompt contextualizer_prompt(std::string_view name, const CtxRequest& request) {
  if (text::trim(request.observation).empty()) throw Error(ErrorCode::EmptyObservation, "observation is empty");
  const std::string hint = request.hint_action ? render_action(*request.hint_action) : std::string();
  const prompts::Bindings bindings{{"domain_info", request.domain_info},
                                   {"goal", request.task_instruction},
                                   {"history", request.history},
                                   {"observation", request.observation},
                                   {"action", hint}};
  return Prompt{prompts::fill(prompts::system_template(name), bindings),
                prompts::fill(prompts::user_template(name), bindings)};
}

}  // namespace

std::string_view to_string(CtxSourceKind kind) noexcept {
  switch (kind) {
    case CtxSourceKind::Model: return "model";
    case CtxSourceKind::Exemplar: return "exemplar";
    case CtxSourceKind::SelfCtx: return "self";
  }
  return "model";
}

std::string serialize_history(std::span<const Action> actions) {
  if (actions.empty()) return "None";
  std::string out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + render_action(actions[i]);
  }
  return out;
}

Prompt build_prompt(const CtxRequest& request) {
  if (request.hint_action) throw Error(ErrorCode::ConfigError, "standard prompt requested with a hint");
  return contextualizer_prompt(prompts::kContextualizer, request);
}

Prompt build_retry_prompt(const CtxRequest& request) {
  if (!request.hint_action) throw Error(ErrorCode::MissingHint, "retry prompt needs the ground-truth action");
  return contextualizer_prompt(prompts::kContextualizerRetry, request);
}

Prompt build_self_prompt(const CtxRequest& request) {
  return contextualizer_prompt(prompts::kSelfContextualizer, request);
}

ContextualizedObservation parse_contextualization(std::string_view text) {
  if (text::trim(text).empty()) throw Error(ErrorCode::EmptyInput, "empty contextualizer output");
  ContextualizedObservation out;
  out.raw_text = std::string(text);

  if (const auto extraction = tag_content(text, "<extraction>", "</extraction>")) {
    out.extraction = std::string(text::trim(*extraction));
    if (const auto reasoning = tag_content(text, "<reasoning>", "</reasoning>")) {
      out.reasoning = std::string(text::trim(*reasoning));
    }
  } else {
    std::optional<HeadingHit> reasoning;
    std::optional<HeadingHit> refined;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
      if (const auto hit = detect_heading(text.substr(pos, end - pos), pos)) {
        if (hit->kind == Heading::Reasoning && !reasoning) reasoning = hit;
        if (hit->kind == Heading::Refined && !refined) refined = hit;
      }
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
    if (reasoning && refined) {
      const auto section = [&](const HeadingHit& self, const HeadingHit& other) {
        const std::size_t end = other.line_start > self.line_start ? other.line_start : text.size();
        return std::string(text::trim(text.substr(self.body_start, end - self.body_start)));
      };
      out.reasoning = section(*reasoning, *refined);
      out.extraction = section(*refined, *reasoning);
    } else {
      out.extraction = std::string(text::trim(text));
    }
  }
  if (out.extraction.empty()) throw Error(ErrorCode::EmptyInput, "contextualizer output has an empty extraction");
  return out;
}

std::vector<Candidate> deduplicate(std::vector<ContextualizedObservation> observations) {
  std::vector<Candidate> out;
  for (auto& obs : observations) {
    const auto it = std::find_if(out.begin(), out.end(),
                                 [&](const Candidate& c) { return c.observation.raw_text == obs.raw_text; });
    if (it != out.end()) {
      ++it->multiplicity;
    } else {
      out.push_back(Candidate{std::move(obs), 1});
    }
  }
  return out;
}

std::vector<Candidate> sample_candidates(Gateway& gateway, const CtxRequest& request, const std::string& backend_id,
                                         int n, double temperature, CtxSourceKind style) {
  if (n < 1) throw Error(ErrorCode::ConfigError, "candidate count must be at least 1");
  Prompt prompt;
  if (request.hint_action) {
    prompt = build_retry_prompt(request);
  } else if (style == CtxSourceKind::SelfCtx) {
    prompt = build_self_prompt(request);
  } else {
    prompt = build_prompt(request);
  }
  const ChatRequest chat{prompt.system, prompt.user, temperature, gateway.options().max_tokens, backend_id};
  const std::vector<Completion> completions = gateway.complete_many(std::vector<ChatRequest>(n, chat));

  std::vector<ContextualizedObservation> parsed;
  std::optional<Error> first_transport_error;
  for (const auto& completion : completions) {
    if (!completion.ok()) {
      if (!first_transport_error) first_transport_error = completion.error;
      continue;
    }
    try {
      ContextualizedObservation obs = parse_contextualization(completion.text);
      obs.source = CtxSourceTag{style == CtxSourceKind::SelfCtx ? CtxSourceKind::SelfCtx : CtxSourceKind::Model,
                                backend_id};
      parsed.push_back(std::move(obs));
    } catch (const Error&) {
    }
  }
  if (parsed.empty()) {
    if (first_transport_error && first_transport_error->code() != ErrorCode::ResponseEmpty) throw *first_transport_error;
    throw Error(ErrorCode::AllUnparsable, std::to_string(n) + " completions from '" + backend_id + "' were unparsable");
  }
  return deduplicate(std::move(parsed));
}

}  // namespace lensloop
