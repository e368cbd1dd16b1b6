#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mobagent::cli {

// Base URL of the manager API when --api is not given.
inline constexpr const char* kApiEnv = "MOBAGENT_API";
inline constexpr const char* kDefaultApi = "http://127.0.0.1:7780";

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRemote = 2;

// Runs one mapctl invocation; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mobagent::cli
