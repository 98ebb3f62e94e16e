#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dimap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInternal = 3;

inline constexpr const char* kVersion = "0.1.0";

// Runs one command line (args excludes the program name) and returns the exit
// code. Normal output goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dimap::cli
