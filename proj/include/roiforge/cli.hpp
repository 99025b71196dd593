#pragma once

#include <ostream>

namespace roiforge {

/// Exit status of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitInternal = 3 };

/// Parses and runs one subcommand. Reports and summaries go to `out`,
/// diagnostics and usage text to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace roiforge
