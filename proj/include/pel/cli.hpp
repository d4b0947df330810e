#pragma once

namespace pel {

inline constexpr const char* kToolName = "pel";
inline constexpr const char* kToolVersion = "0.1.0";

// Full command-line front end. Returns the process exit code:
// 0 success, 2 configuration error, 3 numerical or assertion failure.
int run_cli(int argc, const char* const* argv);

}  // namespace pel
