#pragma once

#include <iosfwd>

namespace emaint {

/// Exit codes of the `emaint` tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 1,
    kExitIo = 2,
    kExitResourceCap = 3,
    kExitBind = 4,
};

/// Entry point of the `emaint` tool with injectable streams.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace emaint
