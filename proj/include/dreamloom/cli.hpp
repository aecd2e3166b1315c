#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dreamloom::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand: serve | seed-demo | palette | validate-bundle.
/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dreamloom::cli
