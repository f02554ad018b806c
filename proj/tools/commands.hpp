#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace peanoseg::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitModel = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitConfig = 3;

// Runs the command line `args` (args[0] is the program name) and returns
// the exit code. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace peanoseg::cli
