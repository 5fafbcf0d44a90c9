#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ftteleop {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitMissingFile = 2,
  kExitInvalidConfig = 3,
  kExitInstability = 4,
  kExitCheckFailed = 5,
  kExitRuntime = 6,
};

/// Entry point of the command-line tool; `args` excludes the program name.
/// Subcommands: simulate, compare, audit, validate.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ftteleop
