#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpwc::cli {

// Exit codes, also documented in the README:
//   0 success
//   2 usage error (bad flags or argument values)
//   3 input error (missing files, malformed or inconsistent spec documents)
//   4 computational failure (gradient check failed, training diverged)
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitComputation = 4;

inline constexpr int kSchemaVersion = 1;

/// Run one command. args excludes the program name. All output goes to the
/// given streams; nothing is read from stdin.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flag names per subcommand, for the help-coverage test.
std::vector<std::pair<std::string, std::vector<std::string>>> command_flags();

/// Rendered help text of one subcommand ("" for the root app).
std::string help_text(const std::string& subcommand);

}  // namespace cpwc::cli
