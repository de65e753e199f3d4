#pragma once

#include <vector>

#include "dvit/config.hpp"
#include "dvit/ops.hpp"

namespace dvit {

// Smooth-L1 over matching (M,2) coordinate sets, summed over landmarks and
// coordinates. Target carries no gradient.
Tensor smooth_l1(const Tensor& pred, const Tensor& target, double delta);

struct AWingConfig {
  double alpha = 2.1;
  double omega = 14.0;
  double epsilon = 1.0;
  double theta = 0.5;
  void validate() const;
};

// Adaptive Wing loss over heatmap sets, mean over pixels and landmarks;
// target-adaptive exponent with a C1-continuous linear tail.
Tensor adaptive_wing(const Tensor& pred, const Tensor& target,
                     const AWingConfig& cfg);

// Scalar evaluation of one pixel's AWing term (test oracle surface).
double awing_value(double pred, double target, const AWingConfig& cfg);

struct StageLossReport {
  Tensor total;      // coord + beta * heat
  Tensor coordinate; // smooth-L1 term
  Tensor heatmap;    // AWing term
};

StageLossReport stage_loss(const Tensor& pred_landmarks,
                           const Tensor& gt_landmarks,
                           const Tensor& pred_heatmaps,
                           const Tensor& gt_heatmaps,
                           const CascadeConfig& cfg);

// Geometric stage weighting: sum_j w^(j-B) * L_j; the final stage has
// weight 1. Throws ConfigError for w < 1.
Tensor total_loss(const std::vector<Tensor>& stage_losses, double w);
std::vector<double> stage_weights(int64_t b, double w);

}  // namespace dvit
