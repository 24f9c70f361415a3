#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace swarmsf::cli {

/// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,    // I/O failure or unexpected error
  kInvalidInput = 2,    // invalid problem, schema, grid or solver configuration
  kNoFeasible = 3,      // the run produced no feasible solution
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Progress goes to `err`; artifacts only to files.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace swarmsf::cli
