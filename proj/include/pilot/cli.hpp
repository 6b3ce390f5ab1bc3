#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pilot::cli {

/// Runs one subcommand. `args` excludes the program name.
/// Returns 0 on success, 2 on usage errors, 1 on runtime failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pilot::cli
