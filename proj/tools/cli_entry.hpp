#pragma once

namespace selfnet::cli {

// Full command-line entry point, callable from tests. Returns the process
// exit code: 0 success, 1 configuration error, 2 runtime failure.
int run(int argc, const char* const* argv);

}  // namespace selfnet::cli
