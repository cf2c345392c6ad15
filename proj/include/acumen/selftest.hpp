#pragma once

#include <string>
#include <vector>

namespace acumen {

struct SelfTestResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Fast invariant battery behind the `check` subcommand: solver orders,
// interpolation identities, gradient checks, noise statistics, reward
// formulas and determinism properties.
std::vector<SelfTestResult> run_selftests();

}  // namespace acumen
