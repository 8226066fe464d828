#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lensloop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

/// Runs one command. `args` excludes the program name. Human-readable output
/// goes to `out`/`err`; the last line on `out` is always
/// `SUMMARY {json}`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lensloop::cli
