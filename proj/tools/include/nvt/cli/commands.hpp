#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nvt::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  // anything not covered below (I/O, internal)
  kConfigError = 2,
  kTrainingAbort = 3,
  kFormatError = 4,
  kVerificationFailure = 5,
};

// Runs one `nvt` subcommand. `args` excludes the program name. Exactly one
// JSON document is written to `out`; logs and diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Value of NVT_THREADS, or 1 when unset. Throws ConfigError when malformed.
unsigned worker_threads_from_env();

}  // namespace nvt::cli
