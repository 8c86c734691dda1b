#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mimo {

// Exit codes shared by the subcommands.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,  // selftest suite failed
    kExitConfig = 2,   // bad flags / config / mismatched inputs
    kExitIo = 3,
    kExitNumerical = 4,
};

// Entry point of the mimo-assoc command line: generate, split, train, eval,
// selftest. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mimo
