#pragma once

#include <functional>
#include <memory>
#include <string>

#include "lensloop/action.hpp"
#include "lensloop/task.hpp"

namespace lensloop {

enum class PageKind { Search, Results, Item, Confirmation, External };

std::string_view to_string(PageKind kind) noexcept;
std::optional<PageKind> page_kind_from_string(std::string_view name) noexcept;

struct Observation {
  std::string text;
  PageKind page_kind = PageKind::Search;
  int step_index = 0;

  bool operator==(const Observation&) const = default;
};

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

/// A single-episode, single-caller environment. reset() opens an episode and
/// step() advances it until `done`.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual Observation reset(const Task& task) = 0;
  virtual StepOutcome step(const Action& action) = 0;

  virtual ActionDialect dialect() const = 0;
  /// Value substituted for {domain_info} in contextualizer prompts.
  virtual std::string domain_info() const = 0;
  virtual int max_steps() const = 0;
};

/// Builds a fresh environment for a task; used to run episodes in parallel.
using EnvironmentFactory = std::function<std::unique_ptr<Environment>(const Task&)>;

}  // namespace lensloop
