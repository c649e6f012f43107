#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sur::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Runs one invocation; `args` excludes the program name. Returns the
/// process exit code (see the kExit constants above).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sur::cli
