#pragma once

// JSON mappings for the domain types. Field names here are the public file
// contract read by external tools.

#include <nlohmann/json.hpp>

#include "lensloop/action.hpp"
#include "lensloop/environment.hpp"
#include "lensloop/task.hpp"

namespace lensloop {

void to_json(nlohmann::json& j, const Money& m);
void from_json(const nlohmann::json& j, Money& m);
void to_json(nlohmann::json& j, const GoalSpec& g);
void from_json(const nlohmann::json& j, GoalSpec& g);
void to_json(nlohmann::json& j, const EnvBinding& b);
void from_json(const nlohmann::json& j, EnvBinding& b);
void to_json(nlohmann::json& j, const Task& t);
void from_json(const nlohmann::json& j, Task& t);
void to_json(nlohmann::json& j, const Observation& o);
void from_json(const nlohmann::json& j, Observation& o);

/// Catalog items keep option-group order, so they go through ordered_json.
nlohmann::ordered_json catalog_item_to_json(const CatalogItem& item);
CatalogItem catalog_item_from_json(const nlohmann::ordered_json& j);

/// Reads a whole file; throws IoError.
std::string read_file(const std::filesystem::path& path);

}  // namespace lensloop
