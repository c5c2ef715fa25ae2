#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dtd {

// Full command-line entry point. args excludes the program name.
// Exit codes: 0 success, 2 usage error, 3 infeasible or malformed input,
// 4 convergence failure, 5 validation failure, 1 internal error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dtd
