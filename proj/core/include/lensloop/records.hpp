#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lensloop/action.hpp"
#include "lensloop/contextualizer.hpp"
#include "lensloop/environment.hpp"
#include "lensloop/task.hpp"

namespace lensloop {

/// Identifies one step of one trajectory.
struct StepRef {
  std::string trajectory_id;
  int step_index = 0;

  auto operator<=>(const StepRef&) const = default;
};

struct TrajectoryStep {
  Observation observation;
  std::optional<ContextualizedObservation> contextualized;
  Action action;

  bool operator==(const TrajectoryStep&) const = default;
};

struct Trajectory {
  std::string id;
  Task task;
  std::vector<TrajectoryStep> steps;
  double final_reward = 0.0;
  std::string agent_backend;
  int iteration = 0;
  ActionDialect dialect = ActionDialect::Shop;
  std::string domain_info;

  std::vector<Action> actions() const;
  bool operator==(const Trajectory&) const = default;
};

/// One supervised example: the contextualizer inputs and the selected target.
struct SftRecord {
  std::string goal;
  std::string history;
  std::string observation;
  std::string target;
  int reward = 0;
  bool from_retry = false;
  StepRef step_ref;

  bool operator==(const SftRecord&) const = default;
};

void to_json(nlohmann::json& j, const StepRef& r);
void from_json(const nlohmann::json& j, StepRef& r);
void to_json(nlohmann::json& j, const ContextualizedObservation& c);
void from_json(const nlohmann::json& j, ContextualizedObservation& c);
void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);
void to_json(nlohmann::json& j, const SftRecord& r);
/// Rejects objects whose key set is not exactly the SftRecord fields.
void from_json(const nlohmann::json& j, SftRecord& r);

}  // namespace lensloop
