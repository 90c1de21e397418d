#ifndef CMFKIT_TOOLS_CLI_HPP
#define CMFKIT_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace cmfkit::tools {

/// Dispatches one subcommand. args excludes the program name.
/// Exit codes: 0 success, 2 bad arguments, 3 I/O failure,
/// 4 non-convergence under --strict (or a numerical failure).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace cmfkit::tools

#endif
