#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace isddp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;  // a validation or bound check failed
inline constexpr int kExitUsage = 2;
inline constexpr int kExitSolver = 3;

// Runs the command line given without the program name. Reports go to the
// paths named by the flags or to out; messages go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace isddp::cli
