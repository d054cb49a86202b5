#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace pmag::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kFormatError = 2,
  kValidationError = 3,
  kProviderError = 4,
};

/// Runs `body`, mapping library errors to exit codes and writing the
/// message to `err`.
int run_guarded(const std::function<void()>& body, std::ostream& err);

/// Runs the `pmag` command line. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pmag::cli
