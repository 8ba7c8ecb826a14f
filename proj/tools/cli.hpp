#pragma once

#include <ostream>

namespace satire {

// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

// Runs one `satire <subcommand> ...` invocation. Normal output goes to `out`,
// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace satire
