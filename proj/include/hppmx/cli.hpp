#pragma once

#include <iosfwd>

namespace hppmx::cli {

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 1 I/O failure, 2 invalid input or configuration, 3 numerical
/// failure inside the sampler.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hppmx::cli
