#pragma once

#include <string>
#include <vector>

namespace fracpile::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
// 3 acceptance-gate failure in --check mode.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace fracpile::cli
