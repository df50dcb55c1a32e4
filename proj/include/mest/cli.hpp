#pragma once

// Command-line front end. run_cli is the whole program minus process setup, so
// tests can drive it and inspect exit codes.

#include <iosfwd>
#include <string>
#include <vector>

namespace mest::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kDegenerateFit = 3,
  kThresholdFailure = 4,
  kDiagnosticFailure = 5,
};

/// Output root: --out if given, else $MEST_OUTPUT_ROOT, else "results".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mest::cli
