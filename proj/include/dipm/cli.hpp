#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dipm::cli {

inline constexpr int kExitConverged = 0;
inline constexpr int kExitMaxIters = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitNumerical = 4;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitInternal = 70;

/// Runs one command line (args[0] is the program name). Reports go to `out`,
/// machine-readable errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dipm::cli
