#pragma once

#include <ostream>
#include <string_view>

namespace greybox {

inline constexpr std::string_view kVersion = "0.1.0";

// Exit codes: 0 success, 1 some fit or cell failed, 2 usage, config or I/O
// error (nothing written).
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailures = 1;
inline constexpr int kExitError = 2;

inline constexpr const char* kConfigEnv = "GREYBOX_CONFIG";

// Entry point behind the greybox executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace greybox
