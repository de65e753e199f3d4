#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dvit/layers.hpp"

namespace dvit {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m, v;
};

// Bias-corrected Adam over a named parameter list. A step with any
// non-finite gradient is skipped entirely and reported to the caller.
class Adam {
 public:
  // Returns true if the step was applied.
  bool step(const std::vector<std::pair<std::string, Tensor*>>& params,
            const AdamHyper& hyper);

  int64_t step_count() const { return t_; }
  int64_t skipped_count() const { return skipped_; }

  std::map<std::string, AdamMoments>& moments() { return moments_; }
  const std::map<std::string, AdamMoments>& moments() const { return moments_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  std::map<std::string, AdamMoments> moments_;
  int64_t t_ = 0;
  int64_t skipped_ = 0;
};

// initial_lr * 0.5^floor(epoch / period)
double lr_schedule(int64_t epoch, double initial_lr, int64_t period = 200);

std::vector<std::pair<std::string, Tensor*>> collect_params(
    const std::function<void(const ParamVisitor&)>& visit_all);

}  // namespace dvit
