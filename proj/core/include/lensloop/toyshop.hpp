#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lensloop/environment.hpp"

namespace lensloop {

/// Purchase grade: matched goal attributes, matched goal options and a price
/// check, divided by the number of goal components plus one.
double grade(const CatalogItem& purchased, const std::map<std::string, std::string>& chosen_options,
             const GoalSpec& goal);

/// Read-only product catalog shared between ToyShop instances.
class Catalog {
 public:
  explicit Catalog(std::vector<CatalogItem> items);

  const CatalogItem* find(std::string_view id) const;
  const std::vector<CatalogItem>& items() const { return items_; }  // sorted by id

  /// Items with at least one query token in their title or attributes, ordered
  /// by descending overlap count then ascending id.
  std::vector<const CatalogItem*> search(std::string_view query) const;

  /// Number of distinct case-folded query tokens present among the whitespace
  /// tokens of the item's title and attributes.
  static int overlap(std::string_view query, const CatalogItem& item);

 private:
  std::vector<CatalogItem> items_;
};

struct ToyShopOptions {
  int max_steps = 15;
  int page_size = 10;
};

/// Deterministic text shopping site with bracketed-button pages. Inadmissible
/// actions leave the page unchanged, prepend a notice line and consume a step.
class ToyShop final : public Environment {
 public:
  explicit ToyShop(std::shared_ptr<const Catalog> catalog, ToyShopOptions options = {});

  Observation reset(const Task& task) override;
  StepOutcome step(const Action& action) override;

  ActionDialect dialect() const override { return ActionDialect::Shop; }
  std::string domain_info() const override { return "shopping"; }
  int max_steps() const override { return options_.max_steps; }

 private:
  struct State {
    PageKind page = PageKind::Search;
    std::string query;
    int results_page = 1;
    const CatalogItem* item = nullptr;
    std::map<std::string, std::string> chosen;  // option name -> value
  };

  std::string render(const State& state) const;
  bool apply(const Action& action, double& reward, bool& done);

  std::shared_ptr<const Catalog> catalog_;
  ToyShopOptions options_;
  Task task_;
  State state_;
  int steps_ = 0;
  bool open_ = false;
};

}  // namespace lensloop
