#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vat {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;  // verification or acceptance failure
inline constexpr int kExitUsage = 2;   // usage or configuration error

/// Runs the `vatrack` command line; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vat
