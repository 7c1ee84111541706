#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gatets {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Runtime integrity suite: finite-difference gradient checks over every
// differentiable operation and a toy end-to-end model, kron/bilinear route
// equivalence, top-k sparsity properties, and sparse-vs-dense model
// equality. `perturb_gradient` is a test hook that corrupts one analytic
// gradient so a harness can confirm failures are detected.
std::vector<CheckResult> run_selfcheck(uint64_t seed = 7,
                                       bool perturb_gradient = false);

}  // namespace gatets
