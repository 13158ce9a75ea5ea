#pragma once

#include <iosfwd>

namespace vsr::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kInfeasible = 2,
  kNotConverged = 3,
  kIo = 4,
};

/// Entry point for the `vsr` tool. Reports go to `out`, diagnostics and
/// machine-readable failures to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vsr::cli
