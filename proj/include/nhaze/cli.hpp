#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nhaze::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `nhaze` invocation. `args` excludes the program name. Returns 2
/// for bad arguments or configuration, 1 when any item fails at run time,
/// 0 otherwise.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nhaze::cli
