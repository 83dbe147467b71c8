#pragma once

// Command-line entry point. Exit codes: 0 success, 2 configuration/usage
// error, 3 numerical failure.

namespace groupkit::cli {

int dispatch(int argc, const char* const* argv);

}  // namespace groupkit::cli
