#pragma once

#include <string>
#include <vector>

namespace dcq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Parses argv and runs one subcommand. Returns the process exit code.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace dcq::cli
