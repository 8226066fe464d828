#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lensloop {

/// Money in integer cents. Catalog and task files carry dollars as JSON
/// numbers; they are rounded to the nearest cent on load.
struct Money {
  std::int64_t cents = 0;

  static Money from_dollars(double dollars);
  double dollars() const { return static_cast<double>(cents) / 100.0; }
  /// "$10.99"
  std::string str() const;

  auto operator<=>(const Money&) const = default;
};

struct GoalSpec {
  std::set<std::string> attributes;
  std::map<std::string, std::string> options;
  Money price_budget;

  bool operator==(const GoalSpec&) const = default;
};

struct EnvBinding {
  enum class Kind { ToyShop, External };

  Kind kind = Kind::ToyShop;
  std::string endpoint;     // External only
  std::string domain_info;  // External only; ToyShop always uses "shopping"

  bool operator==(const EnvBinding&) const = default;
};

struct Task {
  std::string id;
  std::string instruction;
  EnvBinding binding;
  std::set<std::string> split_tags;
  std::optional<GoalSpec> goal;

  bool has_tag(const std::string& tag) const { return split_tags.count(tag) != 0; }
  bool operator==(const Task&) const = default;
};

struct OptionGroup {
  std::string name;
  std::vector<std::string> values;

  bool operator==(const OptionGroup&) const = default;
};

struct CatalogItem {
  std::string id;
  std::string title;
  Money price;
  std::set<std::string> attributes;
  std::vector<OptionGroup> options;  // in file order

  bool operator==(const CatalogItem&) const = default;
};

/// Loads a JSON array of tasks. Ids must be unique and ToyShop tasks must carry
/// a goal; violations throw SchemaError.
std::vector<Task> load_tasks(const std::filesystem::path& path);
/// Loads a JSON array of catalog items, validating prices and option values.
std::vector<CatalogItem> load_catalog(const std::filesystem::path& path);

/// Keeps tasks carrying `tag`; an empty tag keeps everything.
std::vector<Task> filter_by_tag(const std::vector<Task>& tasks, const std::string& tag);

}  // namespace lensloop
