#include "lensloop/records.hpp"

#include <set>

#include "lensloop/error.hpp"
#include "lensloop/serialization.hpp"

namespace lensloop {

using nlohmann::json;

std::vector<Action> Trajectory::actions() const {
  std::vector<Action> out;
  out.reserve(steps.size());
  for (const auto& step : steps) out.push_back(step.action);
  return out;
}

void to_json(json& j, const StepRef& r) { j = json{{"trajectory_id", r.trajectory_id}, {"step_index", r.step_index}}; }

void from_json(const json& j, StepRef& r) {
  r.trajectory_id = j.at("trajectory_id").get<std::string>();
  r.step_index = j.at("step_index").get<int>();
}

void to_json(json& j, const ContextualizedObservation& c) {
  j = json{{"reasoning", c.reasoning},
           {"extraction", c.extraction},
           {"raw_text", c.raw_text},
           {"source", json{{"kind", to_string(c.source.kind)}, {"backend_id", c.source.backend_id}}}};
}

void from_json(const json& j, ContextualizedObservation& c) {
  c.reasoning = j.at("reasoning").get<std::string>();
  c.extraction = j.at("extraction").get<std::string>();
  c.raw_text = j.at("raw_text").get<std::string>();
  const json& source = j.at("source");
  const std::string kind = source.at("kind").get<std::string>();
  if (kind == "model") {
    c.source.kind = CtxSourceKind::Model;
  } else if (kind == "exemplar") {
    c.source.kind = CtxSourceKind::Exemplar;
  } else if (kind == "self") {
    c.source.kind = CtxSourceKind::SelfCtx;
  } else {
    throw Error(ErrorCode::SchemaError, "unknown contextualizer source '" + kind + "'");
  }
  c.source.backend_id = source.value("backend_id", "");
}

void to_json(json& j, const Trajectory& t) {
  json steps = json::array();
  for (const auto& step : t.steps) {
    json s{{"observation", step.observation}, {"action", render_action(step.action, t.dialect)}};
    s["contextualized"] = step.contextualized ? json(*step.contextualized) : json(nullptr);
    steps.push_back(std::move(s));
  }
  j = json{{"id", t.id},
           {"task", t.task},
           {"steps", std::move(steps)},
           {"final_reward", t.final_reward},
           {"agent_backend", t.agent_backend},
           {"iteration", t.iteration},
           {"dialect", to_string(t.dialect)},
           {"domain_info", t.domain_info}};
}

void from_json(const json& j, Trajectory& t) {
  t.id = j.at("id").get<std::string>();
  t.task = j.at("task").get<Task>();
  const auto dialect = dialect_from_string(j.at("dialect").get<std::string>());
  if (!dialect) throw Error(ErrorCode::SchemaError, "unknown dialect in trajectory " + t.id);
  t.dialect = *dialect;
  t.final_reward = j.at("final_reward").get<double>();
  t.agent_backend = j.value("agent_backend", "");
  t.iteration = j.value("iteration", 0);
  t.domain_info = j.value("domain_info", "");
  t.steps.clear();
  for (const auto& s : j.at("steps")) {
    TrajectoryStep step;
    step.observation = s.at("observation").get<Observation>();
    if (s.contains("contextualized") && !s["contextualized"].is_null()) {
      step.contextualized = s["contextualized"].get<ContextualizedObservation>();
    }
    step.action = parse_action(s.at("action").get<std::string>(), t.dialect);
    t.steps.push_back(std::move(step));
  }
}

void to_json(json& j, const SftRecord& r) {
  j = json{{"goal", r.goal},
           {"history", r.history},
           {"observation", r.observation},
           {"target", r.target},
           {"reward", r.reward},
           {"from_retry", r.from_retry},
           {"step_ref", r.step_ref}};
}

void from_json(const json& j, SftRecord& r) {
  static const std::set<std::string> kFields{"goal",   "history",    "observation", "target",
                                             "reward", "from_retry", "step_ref"};
  if (!j.is_object() || j.size() != kFields.size()) throw Error(ErrorCode::SchemaError, "record field set mismatch");
  for (const auto& [key, value] : j.items()) {
    if (!kFields.count(key)) throw Error(ErrorCode::SchemaError, "unexpected record field '" + key + "'");
  }
  r.goal = j.at("goal").get<std::string>();
  r.history = j.at("history").get<std::string>();
  r.observation = j.at("observation").get<std::string>();
  r.target = j.at("target").get<std::string>();
  r.reward = j.at("reward").get<int>();
  r.from_retry = j.at("from_retry").get<bool>();
  r.step_ref = j.at("step_ref").get<StepRef>();
}

}  // namespace lensloop
