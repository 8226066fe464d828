#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lensloop/action.hpp"
#include "lensloop/prompts.hpp"

namespace lensloop {

class Gateway;

enum class CtxSourceKind { Model, Exemplar, SelfCtx };

std::string_view to_string(CtxSourceKind kind) noexcept;

struct CtxSourceTag {
  CtxSourceKind kind = CtxSourceKind::Model;
  std::string backend_id;  // empty for Exemplar

  bool operator==(const CtxSourceTag&) const = default;
};

/// Output of a contextualizer: reasoning plus the extraction an agent reads.
struct ContextualizedObservation {
  std::string reasoning;
  std::string extraction;
  std::string raw_text;
  CtxSourceTag source;

  bool operator==(const ContextualizedObservation&) const = default;
};

struct CtxRequest {
  std::string task_instruction;
  std::string history;  // serialize_history() output
  std::string observation;
  std::optional<Action> hint_action;  // present only for the retry round
  std::string domain_info;
};

/// A unique candidate and how many of the sampled completions produced it.
struct Candidate {
  ContextualizedObservation observation;
  int multiplicity = 1;
};

/// Numbered lines "1. <action>"; the single line "None" when empty.
std::string serialize_history(std::span<const Action> actions);

Prompt build_prompt(const CtxRequest& request);
/// Same information source as build_prompt followed by a "# Hint" block with
/// the rendered ground-truth action.
Prompt build_retry_prompt(const CtxRequest& request);
/// Self-contextualization prompt asking for <reasoning>/<extraction> tags.
Prompt build_self_prompt(const CtxRequest& request);

/// Splits model output on <reasoning>/<extraction> tags, else on "Reasoning"
/// and "Refined observation" headings, else treats the whole text as the
/// extraction.
ContextualizedObservation parse_contextualization(std::string_view text);

/// Collapses textually identical candidates, keeping first-occurrence order.
std::vector<Candidate> deduplicate(std::vector<ContextualizedObservation> observations);

/// Samples n completions from `backend_id` and parses them. The retry prompt
/// is used whenever the request carries a hint; otherwise `style` picks the
/// standard (Model) or self-contextualization (SelfCtx) prompt. Unparsable
/// slots are dropped; throws AllUnparsable when nothing parses, or the first
/// gateway error when every slot failed in transport.
std::vector<Candidate> sample_candidates(Gateway& gateway, const CtxRequest& request, const std::string& backend_id,
                                         int n, double temperature = 0.7,
                                         CtxSourceKind style = CtxSourceKind::Model);

}  // namespace lensloop
