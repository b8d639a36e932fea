#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace semfilt::cli {

/// Runs one subcommand. `args` excludes the program name. Tables and scalars go
/// to `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Formats a value with 6 significant digits; integral results keep a ".0".
std::string format6(double v);

}  // namespace semfilt::cli
