#pragma once

#include <iosfwd>

namespace coolopt {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitInternal = 3 };

/// Entry point of the `coolopt` tool. Errors are reported on `err` as one line
/// `error: <Code>: <message>`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coolopt
