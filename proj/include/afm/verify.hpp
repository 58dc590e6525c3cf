#pragma once

#include <string>
#include <vector>

namespace afm {

struct CheckResult {
  std::string name;
  bool pass;
  std::string detail;
};

// Deterministic property and oracle-equivalence checks over the sampler,
// exact enumeration, the weighted-CE identity, SNIS behaviour, weight
// simplifications, gradients and the constrained sampler. Runs in about a
// minute.
std::vector<CheckResult> verify_suite();

// Prints one pass/fail line per check; returns true when all pass.
bool print_check_table(const std::vector<CheckResult>& results);

}  // namespace afm
