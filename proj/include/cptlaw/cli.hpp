#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cptlaw::cli {

/// Runs one CLI invocation (argv without the program name). Exit codes:
/// 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cptlaw::cli
