#pragma once
// Command-line entry point: prepare, train, eval, generate, check-invariance
// and synth subcommands.
//
// Exit codes: 0 success, 2 usage, 3 numerical failure, 4 I/O.

#include <iosfwd>
#include <iostream>

namespace glassvae::cli {

inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace glassvae::cli
