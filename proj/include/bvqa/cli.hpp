#pragma once

#include <iosfwd>

namespace bvqa {

// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage
// error, 3 data error, 4 numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Environment variable naming the default JSON config file.
inline constexpr const char* kConfigEnvVar = "BVQA_CONFIG";

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bvqa
