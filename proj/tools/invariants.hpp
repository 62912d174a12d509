#pragma once

#include <functional>
#include <string>
#include <vector>

namespace pisonet::cli {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Fast property suite run by `pisonet check`.
std::vector<CheckResult> run_invariant_suite();

}  // namespace pisonet::cli
