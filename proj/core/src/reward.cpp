#include "lensloop/reward.hpp"

#include <algorithm>
#include <cctype>

#include "lensloop/agent.hpp"
#include "lensloop/error.hpp"
#include "lensloop/gateway.hpp"

namespace lensloop {

using nlohmann::json;

void to_json(json& j, const CandidateRecord& r) {
  json verdicts = json::array();
  for (const auto& v : r.verdicts) {
    verdicts.push_back(json{{"predicted", v.predicted}, {"error", v.error}, {"judged", v.judged}});
  }
  j = json{{"step_ref", r.step_ref},
           {"candidate", r.candidate},
           {"multiplicity", r.multiplicity},
           {"per_agent_scores", r.per_agent_scores},
           {"reward", r.reward},
           {"from_retry", r.from_retry},
           {"verdicts", std::move(verdicts)}};
}

void from_json(const json& j, CandidateRecord& r) {
  r.step_ref = j.at("step_ref").get<StepRef>();
  r.candidate = j.at("candidate").get<ContextualizedObservation>();
  r.multiplicity = j.at("multiplicity").get<int>();
  r.per_agent_scores = j.at("per_agent_scores").get<std::vector<int>>();
  r.reward = j.at("reward").get<int>();
  r.from_retry = j.at("from_retry").get<bool>();
  r.verdicts.clear();
  if (j.contains("verdicts")) {
    for (const auto& v : j["verdicts"]) {
      r.verdicts.push_back(AgentVerdict{v.value("predicted", ""), v.value("error", ""), v.value("judged", false)});
    }
  }
}

Prompt build_judge_prompt(const Action& reference, const Action& predicted) {
  const std::string ref = render_action(reference);
  const std::string pred = render_action(predicted);
  const prompts::Bindings bindings{{"ref_action", ref}, {"pred_action", pred}};
  return Prompt{std::string(prompts::system_template(prompts::kJudge)),
                prompts::fill(prompts::user_template(prompts::kJudge), bindings)};
}

int parse_judge_result(std::string_view text) {
  constexpr std::string_view kMarker = "[RESULT]";
  const auto at = text.rfind(kMarker);
  if (at == std::string_view::npos) {
    throw Error(ErrorCode::JudgeUnparsable, "no [RESULT] marker").with_raw_text(std::string(text));
  }
  // Last integer token after the marker.
  std::optional<long long> last;
  std::size_t i = at + kMarker.size();
  while (i < text.size()) {
    if (std::isdigit(static_cast<unsigned char>(text[i]))) {
      const bool negative = i > 0 && text[i - 1] == '-';
      std::size_t j = i;
      long long value = 0;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j])) && value < 1'000'000) {
        value = value * 10 + (text[j] - '0');
        ++j;
      }
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      last = negative ? -value : value;
      i = j;
    } else {
      ++i;
    }
  }
  if (!last) throw Error(ErrorCode::JudgeUnparsable, "no integer after [RESULT]").with_raw_text(std::string(text));
  if (*last != 0 && *last != 1) {
    throw Error(ErrorCode::JudgeUnparsable, "judge score " + std::to_string(*last) + " is not 0 or 1")
        .with_raw_text(std::string(text));
  }
  return static_cast<int>(*last);
}

int action_match(const Action& predicted, const Action& reference, const std::optional<std::string>& judge_backend,
                 Gateway* gateway, const std::set<ActionKind>& open_ended_kinds) {
  if (predicted.kind != reference.kind) return 0;
  const Action pred = normalize(predicted);
  const Action ref = normalize(reference);
  if (pred == ref) return 1;
  if (!judge_backend || !open_ended_kinds.count(ref.kind)) return 0;
  if (!gateway) throw Error(ErrorCode::ConfigError, "judge configured without a gateway");
  const Prompt prompt = build_judge_prompt(ref, pred);
  const std::string verdict =
      gateway->complete(ChatRequest{prompt.system, prompt.user, 0.0, gateway->options().max_tokens, *judge_backend});
  return parse_judge_result(verdict);
}

CandidateRecord score_candidate(Gateway& gateway, const Candidate& candidate, const StepContext& step,
                                const EnsembleConfig& config, const StepRef& step_ref, bool from_retry) {
  if (config.agent_backends.empty()) throw Error(ErrorCode::ConfigError, "ensemble has no agents");
  CandidateRecord record;
  record.step_ref = step_ref;
  record.candidate = candidate.observation;
  record.multiplicity = candidate.multiplicity;
  record.from_retry = from_retry;

  const Prompt prompt = build_agent_prompt(step.goal, step.history, candidate.observation.extraction, step.dialect,
                                           ObservationMode::Contextualized);
  std::vector<ChatRequest> requests;
  requests.reserve(config.agent_backends.size());
  for (const auto& backend : config.agent_backends) {
    requests.push_back(ChatRequest{prompt.system, prompt.user, 0.0, gateway.options().max_tokens, backend});
  }
  const std::vector<Completion> completions = gateway.complete_many(requests);

  for (const auto& completion : completions) {
    AgentVerdict verdict;
    int score = 0;
    try {
      const AgentTurn turn = parse_agent_turn(completion.value(), step.dialect);
      verdict.predicted = render_action(turn.action);
      verdict.judged = turn.action.kind == step.reference.kind && config.judge_backend &&
                       config.open_ended_kinds.count(step.reference.kind) &&
                       normalize(turn.action) != normalize(step.reference);
      score = action_match(turn.action, step.reference, config.judge_backend, &gateway, config.open_ended_kinds);
    } catch (const Error& e) {
      verdict.error = e.what();
      score = 0;
    }
    record.per_agent_scores.push_back(score);
    record.verdicts.push_back(std::move(verdict));
  }
  record.reward = 0;
  for (const int s : record.per_agent_scores) record.reward += s;
  return record;
}

Selection select_best(std::span<const CandidateRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidates to select from");
  std::size_t best = 0;
  bool any_retry = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].reward > records[best].reward) best = i;
    any_retry = any_retry || records[i].from_retry;
  }
  if (records[best].reward == 0 && !any_retry) return Selection::retry();
  return Selection::selected(best);
}

}  // namespace lensloop
