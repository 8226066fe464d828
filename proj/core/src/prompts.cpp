#include "lensloop/prompts.hpp"

#include "lensloop/error.hpp"
#include "lensloop/prompt_assets.hpp"

namespace lensloop::prompts {

namespace {

std::string_view lookup(std::string_view name, std::string_view part, bool required) {
  const auto& all = assets::prompt_assets();
  const std::string key = std::string(name) + "." + std::string(part) + ".txt";
  const auto it = all.find(key);
  if (it == all.end()) {
    if (required) throw Error(ErrorCode::ConfigError, "missing prompt asset " + key);
    return {};
  }
  return it->second;
}

}  // namespace

std::string_view system_template(std::string_view name) { return lookup(name, "system", false); }
std::string_view user_template(std::string_view name) { return lookup(name, "user", true); }

std::string fill(std::string_view tmpl, const Bindings& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string_view name = tmpl.substr(i + 1, close - i - 1);
        bool bound = false;
        for (const auto& [key, value] : bindings) {
          if (key == name) {
            out += value;
            bound = true;
            break;
          }
        }
        if (bound) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

}  // namespace lensloop::prompts
