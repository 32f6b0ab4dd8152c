#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cmeta::cli {

/// Runs the command line `args` (args[0] is the program name). Returns the
/// process exit code: 0 on success, 2 on invalid input or configuration, 1 on
/// internal errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cmeta::cli
