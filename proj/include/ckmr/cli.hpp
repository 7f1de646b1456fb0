#pragma once

namespace ckmr {

// Entry point behind the ckmr binary.  Returns the process exit code:
// 0 success, 2 input or configuration error, 3 numerical abort.
int run_cli(int argc, const char* const* argv);

}  // namespace ckmr
