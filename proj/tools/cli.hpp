#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace copolicy::cli {

/// Runs the command line and returns the process exit code: 0 on success,
/// 2 for malformed input (bad flags, config or CSV), 1 for runtime failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace copolicy::cli
