#pragma once

// Command-line front end. Exit codes:
//   0 success, 2 usage, 3 non-convergence, 4 degenerate geometry, 5 I/O or schema.

#include <iosfwd>
#include <string>
#include <vector>

namespace asyncmic::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitDegenerate = 4;
inline constexpr int kExitIo = 5;

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace asyncmic::cli
