#pragma once

#include <iosfwd>

namespace ssm {

// Exit codes: 0 success, 1 validation or assumption failure, 2 numerical
// failure, 3 I/O failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ssm
