#pragma once

#include <string>
#include <vector>

namespace eced {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `eced` tool: gen, run, diag and serve subcommands.
int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args);  // args exclude the program name

}  // namespace eced
