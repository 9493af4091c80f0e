#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fuq::cli {

enum ExitCode : int {
  kOk = 0,
  kCriteriaFailed = 1,  // validate ran but some criterion failed
  kInputError = 2,
  kNumericalError = 3,
};

// args excludes the program name. Results go to `out`, diagnostics and
// progress to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fuq::cli
