#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace enkfcal {

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitNumerical = 3,
};

// Runs the command-line front end with argv-style arguments (args[0] is the
// program name). Results go to files or `out`; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace enkfcal
