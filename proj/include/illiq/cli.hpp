#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace illiq {

// Process exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_parse = 1,          // malformed config, bad flags, missing file
    exit_certification = 2,  // cost function fails certification
    exit_mismatch = 3,       // method or study does not apply to the game
    exit_solver = 4,
    exit_hash = 5,           // solution file does not belong to the config
    exit_assertion = 6,      // a sweep assertion failed
};

/// Runs one subcommand (check, solve, simulate, sweep); args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace illiq
