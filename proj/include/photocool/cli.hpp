#pragma once

#include <iosfwd>

namespace photocool {

/// Entry point of the `photocool` tool. Returns the process exit code:
/// 0 ok, 2 validation, 3 instability/heating, 4 simulation abort,
/// 5 optimization/fit failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace photocool
