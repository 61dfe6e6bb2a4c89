#pragma once

#include <string>
#include <vector>

namespace cloudpatch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitInternalError = 2;

// Entry point shared by main() and the tests; `args` excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace cloudpatch::cli
