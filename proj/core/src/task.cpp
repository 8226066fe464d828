#include "lensloop/task.hpp"

#include <cmath>
#include <cstdio>

#include "lensloop/error.hpp"
#include "lensloop/serialization.hpp"

namespace lensloop {

Money Money::from_dollars(double dollars) { return Money{static_cast<std::int64_t>(std::llround(dollars * 100.0))}; }

std::string Money::str() const {
  char buf[48];
  const std::int64_t abs_cents = cents < 0 ? -cents : cents;
  std::snprintf(buf, sizeof(buf), "%s$%lld.%02lld", cents < 0 ? "-" : "", static_cast<long long>(abs_cents / 100),
                static_cast<long long>(abs_cents % 100));
  return buf;
}

std::vector<Task> load_tasks(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::SchemaError, path.string() + ": expected a JSON array of tasks");
  std::vector<Task> tasks;
  std::set<std::string> ids;
  for (const auto& entry : doc) {
    Task task = entry.get<Task>();
    if (!ids.insert(task.id).second) throw Error(ErrorCode::SchemaError, "duplicate task id " + task.id);
    if (task.binding.kind == EnvBinding::Kind::ToyShop && !task.goal) {
      throw Error(ErrorCode::SchemaError, "ToyShop task " + task.id + " has no goal_spec");
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<CatalogItem> load_catalog(const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(read_file(path));
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::SchemaError, path.string() + ": expected a JSON array of items");
  std::vector<CatalogItem> items;
  for (const auto& entry : doc) {
    CatalogItem item = catalog_item_from_json(entry);
    if (item.price.cents <= 0) throw Error(ErrorCode::SchemaError, "item " + item.id + " has a non-positive price");
    for (const auto& group : item.options) {
      if (group.values.empty()) {
        throw Error(ErrorCode::SchemaError, "item " + item.id + " option '" + group.name + "' has no values");
      }
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<Task> filter_by_tag(const std::vector<Task>& tasks, const std::string& tag) {
  if (tag.empty()) return tasks;
  std::vector<Task> out;
  for (const auto& task : tasks) {
    if (task.has_tag(tag)) out.push_back(task);
  }
  return out;
}

}  // namespace lensloop
