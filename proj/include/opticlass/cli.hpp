#pragma once

#include <iosfwd>

namespace opticlass {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitPipeline = 4 };

/// Entry point of the `opticlass` tool; normal output goes to `out`,
/// diagnostics and progress to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace opticlass
