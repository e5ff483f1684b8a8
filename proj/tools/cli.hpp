#pragma once

// The `mgst` command line: synth | deblur | train | eval | prox.
//
// Exit codes: 0 success, 1 usage/validation/configuration errors,
// 2 I/O, file-format and environment errors. For repeated flags the last
// occurrence wins.

#include <iosfwd>
#include <string>
#include <vector>

namespace mgst::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitIo = 2;

/// args excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mgst::cli
