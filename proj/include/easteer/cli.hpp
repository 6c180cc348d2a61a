#pragma once

#include <string>
#include <vector>

namespace easteer {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitError = 1,
    kExitUsage = 2,
    kExitIncomplete = 3,
    kExitNoRecords = 4,
    kExitInterrupted = 130,
};

/// Entry point of the `easteer` tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args);

} // namespace easteer
