#pragma once

#include <iosfwd>

namespace recagent::cli {

/// Entry point behind the `recagent` binary. Returns the process exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace recagent::cli
