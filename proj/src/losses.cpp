#include "dvit/losses.hpp"

#include <cmath>

namespace dvit {

Tensor smooth_l1(const Tensor& pred, const Tensor& target, double delta) {
  if (pred.shape() != target.shape())
    throw DimensionError("smooth_l1: shape mismatch " +
                         shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
  if (delta <= 0) throw ConfigError("smooth_l1: delta must be positive");
  double total = 0.0;
  const double *pp = pred.ptr(), *tp = target.ptr();
  for (int64_t i = 0; i < pred.numel(); ++i) {
    double e = pp[i] - tp[i];
    double a = std::fabs(e);
    total += a < delta ? 0.5 * e * e / delta : a - 0.5 * delta;
  }
  return Tensor::make_op(
      {}, {total}, {pred, target}, [delta](TensorNode& self) {
        auto& p = self.parents[0];
        auto& t = self.parents[1];
        double g = self.grad[0];
        if (!p->needs_grad) return;
        for (size_t i = 0; i < p->value.size(); ++i) {
          double e = p->value[i] - t->value[i];
          double d = std::fabs(e) < delta ? e / delta
                                          : (e > 0 ? 1.0 : -1.0);
          p->grad[i] += g * d;
        }
      });
}

void AWingConfig::validate() const {
  if (alpha <= 1.0) throw ConfigError("awing: alpha must exceed 1");
  if (omega <= 0 || epsilon <= 0 || theta <= 0)
    throw ConfigError("awing: omega, epsilon, theta must be positive");
}

double awing_value(double pred, double target, const AWingConfig& cfg) {
  double e = std::fabs(target - pred);
  double expo = cfg.alpha - target;
  double te = std::pow(cfg.theta / cfg.epsilon, expo);
  if (e < cfg.theta)
    return cfg.omega * std::log(1.0 + std::pow(e / cfg.epsilon, expo));
  double a = cfg.omega * (1.0 / (1.0 + te)) * expo *
             std::pow(cfg.theta / cfg.epsilon, expo - 1.0) / cfg.epsilon;
  double c = cfg.theta * a - cfg.omega * std::log(1.0 + te);
  return a * e - c;
}

Tensor adaptive_wing(const Tensor& pred, const Tensor& target,
                     const AWingConfig& cfg) {
  if (pred.shape() != target.shape())
    throw DimensionError("adaptive_wing: shape mismatch " +
                         shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
  cfg.validate();
  double total = 0.0;
  const double *pp = pred.ptr(), *tp = target.ptr();
  const int64_t n = pred.numel();
  for (int64_t i = 0; i < n; ++i) total += awing_value(pp[i], tp[i], cfg);
  double inv = 1.0 / static_cast<double>(n);
  return Tensor::make_op(
      {}, {total * inv}, {pred, target}, [cfg, inv](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        double g = self.grad[0] * inv;
        for (size_t i = 0; i < p->value.size(); ++i) {
          double y = self.parents[1]->value[i];
          double e = std::fabs(y - p->value[i]);
          double expo = cfg.alpha - y;
          double de;
          if (e == 0.0) {
            de = 0.0;
          } else if (e < cfg.theta) {
            double q = std::pow(e / cfg.epsilon, expo - 1.0);
            de = cfg.omega * expo * q /
                 (cfg.epsilon * (1.0 + q * (e / cfg.epsilon)));
          } else {
            double te = std::pow(cfg.theta / cfg.epsilon, expo);
            de = cfg.omega * (1.0 / (1.0 + te)) * expo *
                 std::pow(cfg.theta / cfg.epsilon, expo - 1.0) / cfg.epsilon;
          }
          double sign = p->value[i] > y ? 1.0 : (p->value[i] < y ? -1.0 : 0.0);
          p->grad[i] += g * de * sign;
        }
      });
}

StageLossReport stage_loss(const Tensor& pred_landmarks,
                           const Tensor& gt_landmarks,
                           const Tensor& pred_heatmaps,
                           const Tensor& gt_heatmaps,
                           const CascadeConfig& cfg) {
  AWingConfig aw{cfg.awing_alpha, cfg.awing_omega, cfg.awing_epsilon,
                 cfg.awing_theta};
  StageLossReport rep;
  rep.coordinate = smooth_l1(pred_landmarks, gt_landmarks, cfg.smooth_delta);
  rep.heatmap = adaptive_wing(pred_heatmaps, gt_heatmaps, aw);
  rep.total = add(rep.coordinate, scale(rep.heatmap, cfg.beta));
  return rep;
}

std::vector<double> stage_weights(int64_t b, double w) {
  if (w < 1.0)
    throw ConfigError("total_loss: expanding factor w must satisfy w >= 1");
  if (b < 1) throw ConfigError("total_loss: need at least one stage");
  std::vector<double> ws(static_cast<size_t>(b));
  for (int64_t j = 1; j <= b; ++j)
    ws[static_cast<size_t>(j - 1)] = std::pow(w, static_cast<double>(j - b));
  return ws;
}

Tensor total_loss(const std::vector<Tensor>& stage_losses, double w) {
  auto ws = stage_weights(static_cast<int64_t>(stage_losses.size()), w);
  Tensor acc;
  for (size_t j = 0; j < stage_losses.size(); ++j) {
    Tensor term = scale(stage_losses[j], ws[j]);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

}  // namespace dvit
