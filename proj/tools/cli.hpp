#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pisonet::cli {

/// Exit codes: 0 success, 1 validation failure or bad usage, 2 I/O error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pisonet::cli
