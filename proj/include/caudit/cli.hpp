#pragma once

#include <string>
#include <vector>

namespace caudit::cli {

// Exit codes: 0 success, 1 validation/parse error, 2 I/O error,
// 3 validate-floor failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitFloors = 3;

int run(const std::vector<std::string>& args);

}  // namespace caudit::cli
