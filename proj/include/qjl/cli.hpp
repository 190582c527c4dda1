#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qjl::cli {

enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kConfigError = 2,
  kIoError = 3,
  kAssertionFailed = 4,
};

/// Runs the `qjl` command line. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qjl::cli
