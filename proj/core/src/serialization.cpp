#include "lensloop/serialization.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "lensloop/error.hpp"

namespace lensloop {

using nlohmann::json;

void to_json(json& j, const Money& m) { j = m.dollars(); }

void from_json(const json& j, Money& m) {
  if (!j.is_number()) throw Error(ErrorCode::SchemaError, "money must be a number");
  m = Money::from_dollars(j.get<double>());
}

void to_json(json& j, const GoalSpec& g) {
  j = json{{"attributes", g.attributes}, {"options", g.options}, {"price_budget", g.price_budget}};
}

void from_json(const json& j, GoalSpec& g) {
  g.attributes = j.value("attributes", std::set<std::string>{});
  g.options = j.value("options", std::map<std::string, std::string>{});
  if (!j.contains("price_budget")) throw Error(ErrorCode::SchemaError, "goal_spec.price_budget is required");
  j.at("price_budget").get_to(g.price_budget);
}

void to_json(json& j, const EnvBinding& b) {
  if (b.kind == EnvBinding::Kind::ToyShop) {
    j = "ToyShop";
  } else {
    j = json{{"kind", "External"}, {"endpoint", b.endpoint}, {"domain_info", b.domain_info}};
  }
}

void from_json(const json& j, EnvBinding& b) {
  if (j.is_string()) {
    if (j.get<std::string>() != "ToyShop") throw Error(ErrorCode::SchemaError, "unknown env_binding");
    b = EnvBinding{};
    return;
  }
  if (!j.is_object() || j.value("kind", "") != "External") {
    throw Error(ErrorCode::SchemaError, "env_binding must be \"ToyShop\" or {\"kind\":\"External\",...}");
  }
  b.kind = EnvBinding::Kind::External;
  b.endpoint = j.value("endpoint", "");
  b.domain_info = j.value("domain_info", "");
}

void to_json(json& j, const Task& t) {
  j = json{{"id", t.id},
           {"instruction", t.instruction},
           {"env_binding", t.binding},
           {"split_tags", t.split_tags}};
  if (t.goal) j["goal_spec"] = *t.goal;
}

void from_json(const json& j, Task& t) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "task must be an object");
  try {
    t.id = j.at("id").get<std::string>();
    t.instruction = j.at("instruction").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("task: ") + e.what());
  }
  t.binding = j.contains("env_binding") ? j.at("env_binding").get<EnvBinding>() : EnvBinding{};
  t.split_tags = j.value("split_tags", std::set<std::string>{});
  t.goal.reset();
  if (j.contains("goal_spec") && !j.at("goal_spec").is_null()) t.goal = j.at("goal_spec").get<GoalSpec>();
}

void to_json(json& j, const Observation& o) {
  j = json{{"text", o.text}, {"page_kind", to_string(o.page_kind)}, {"step_index", o.step_index}};
}

void from_json(const json& j, Observation& o) {
  o.text = j.at("text").get<std::string>();
  const auto kind = page_kind_from_string(j.value("page_kind", "External"));
  if (!kind) throw Error(ErrorCode::SchemaError, "unknown page_kind");
  o.page_kind = *kind;
  o.step_index = j.value("step_index", 0);
}

nlohmann::ordered_json catalog_item_to_json(const CatalogItem& item) {
  nlohmann::ordered_json options = nlohmann::ordered_json::object();
  for (const auto& group : item.options) options[group.name] = group.values;
  return nlohmann::ordered_json{{"id", item.id},
                                {"title", item.title},
                                {"price", item.price.dollars()},
                                {"attributes", item.attributes},
                                {"options", options}};
}

CatalogItem catalog_item_from_json(const nlohmann::ordered_json& j) {
  CatalogItem item;
  try {
    item.id = j.at("id").get<std::string>();
    item.title = j.at("title").get<std::string>();
    item.price = Money::from_dollars(j.at("price").get<double>());
    item.attributes = j.value("attributes", std::set<std::string>{});
    if (j.contains("options")) {
      for (const auto& [name, values] : j.at("options").items()) {
        item.options.push_back({name, values.get<std::vector<std::string>>()});
      }
    }
  } catch (const nlohmann::ordered_json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("catalog item: ") + e.what());
  }
  return item;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace lensloop
