#pragma once

namespace mergesim {

/// Full command-line front end. Exit codes: 0 success, 2 configuration
/// error, 3 runtime error.
int run_cli(int argc, const char* const* argv);

}  // namespace mergesim
