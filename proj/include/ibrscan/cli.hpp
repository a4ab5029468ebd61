#pragma once

#include <string>
#include <vector>

namespace ibrscan {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv);

}  // namespace ibrscan
