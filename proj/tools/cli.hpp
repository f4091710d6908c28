#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace synthbody::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Parses the command line and runs one subcommand. Returns the process exit code:
/// 0 on success (including --help), 1 on usage errors, 2 on runtime failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace synthbody::cli
