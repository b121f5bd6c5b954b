#pragma once

#include <string>
#include <vector>

namespace tvc {

// Entry point shared by the binary and the CLI tests. Exit codes:
// 0 success, 2 bad usage/config, 3 input error, 4 internal failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace tvc
