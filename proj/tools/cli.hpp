#pragma once

#include <string>
#include <vector>

namespace ssn::cli {

/// Exit codes: 0 success, 1 runtime or contract error, 2 config or usage error.
int run(int argc, const char* const* argv);

/// Convenience for tests: args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace ssn::cli
