#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dvit/tensor.hpp"

namespace dvit {

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  // 0 = check every coordinate; otherwise sample this many per tensor.
  int64_t max_coords_per_tensor = 0;
  uint64_t seed = 0;
};

struct GradCheckReport {
  bool pass = false;
  bool nonfinite = false;
  double max_rel_err = 0.0;
  int64_t checked_coords = 0;
  std::string worst;  // "tensor#i[j]: analytic=..., numeric=..."
};

// Central-difference oracle. `f` must rebuild its graph from the current
// values of `inputs` on every call and return a scalar.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& inputs,
                           const GradCheckOptions& opt = {});

}  // namespace dvit
