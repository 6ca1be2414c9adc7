#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nadmm::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIterLimit = 2,
  kSolverFailure = 3,
  kNoReference = 4,
};

/// Entry point of the `nadmm` executable. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Comma-separated numbers or a JSON array.
std::vector<double> parse_number_list(const std::string& text);

}  // namespace nadmm::cli
