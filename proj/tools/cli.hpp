#pragma once

#include <iosfwd>

namespace monofix::cli {

// Exit codes: 0 success, 1 a --verify check failed, 2 bad configuration or
// an unusable oracle source.
inline constexpr int exit_ok = 0;
inline constexpr int exit_verification = 1;
inline constexpr int exit_config = 2;

// Runs one subcommand. The JSON report goes to --out when given, else to
// `out`; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace monofix::cli
