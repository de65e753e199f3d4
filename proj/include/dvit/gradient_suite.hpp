#pragma once

#include <string>
#include <vector>

#include "dvit/grad_check.hpp"

namespace dvit {

struct SuiteEntry {
  std::string name;
  GradCheckReport report;
};

// Central-difference checks for every differentiable primitive plus the
// full weighted multi-stage objective on a (B=2, C=8, H=W=8, M=3) toy.
// Large parameter tensors are sampled (seeded) to keep the suite fast.
std::vector<SuiteEntry> run_gradient_suite(double tol = 1e-4,
                                           uint64_t seed = 0);

}  // namespace dvit
