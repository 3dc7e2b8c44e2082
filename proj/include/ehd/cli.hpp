#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ehd::cli {

// Exit statuses of the ehd_stack binary.
enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kUsageError = 2,
  kParseFailure = 3,
  kPreconditionViolation = 4,
  kFitFailure = 5,
  kEmptyFeasibleSet = 6,
};

// args[0] is the program name. Results go to files or out; failures print a
// single-line error JSON to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ehd::cli
