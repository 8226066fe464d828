#pragma once

#include <functional>
#include <map>
#include <string>

namespace lensloop::assets {

/// Prompt template files compiled into the library, keyed by file name
/// (e.g. "contextualizer.user.txt").
const std::map<std::string, std::string, std::less<>>& prompt_assets();

}  // namespace lensloop::assets
