// Command-line front end: vibronix <synth|fit|mc|phonon|stats> [--config FILE] [flags]
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vibronix::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNotALadder = 3;

/// Runs one command; `args` excludes the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vibronix::cli
