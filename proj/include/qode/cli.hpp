#pragma once

#include <string>
#include <vector>

namespace qode {

/// Command-line entry point. Subcommands: check, simulate, learn, reproduce,
/// fuzz. Exit codes: 0 success / condition holds, 1 condition fails or
/// property violated, 2 invalid input (with a JSON error line on stderr).
/// A single summary JSON line goes to stdout per invocation.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, const char* const* argv);

}  // namespace qode
