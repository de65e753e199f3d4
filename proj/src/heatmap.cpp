#include "dvit/heatmap.hpp"

#include <algorithm>
#include <cmath>

namespace dvit {

Tensor coordinate_grid(int64_t h, int64_t w) {
  std::vector<double> g(static_cast<size_t>(h * w * 2));
  for (int64_t r = 0; r < h; ++r)
    for (int64_t c = 0; c < w; ++c) {
      g[(r * w + c) * 2 + 0] = static_cast<double>(c);
      g[(r * w + c) * 2 + 1] = static_cast<double>(r);
    }
  return Tensor::from_data({h * w, 2}, std::move(g));
}

EncodeResult encode_gaussian(const Tensor& landmarks, int64_t h, int64_t w,
                             double sigma) {
  if (sigma <= 0) throw ConfigError("encode_gaussian: sigma must be positive");
  if (landmarks.dim() != 2 || landmarks.size(1) != 2)
    throw DimensionError("encode_gaussian: landmarks must be (M,2), got " +
                         shape_str(landmarks.shape()));
  int64_t m = landmarks.size(0);
  EncodeResult res;
  std::vector<double> out(static_cast<size_t>(m * h * w));
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (int64_t i = 0; i < m; ++i) {
    double x = landmarks.at({i, 0});
    double y = landmarks.at({i, 1});
    double cx = std::clamp(x, 0.0, static_cast<double>(w - 1));
    double cy = std::clamp(y, 0.0, static_cast<double>(h - 1));
    if (cx != x || cy != y) res.clamped = true;
    double total = 0.0;
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c) {
        double dx = static_cast<double>(c) - cx;
        double dy = static_cast<double>(r) - cy;
        double v = std::exp(-(dx * dx + dy * dy) * inv2s2);
        out[(i * h + r) * w + c] = v;
        total += v;
      }
    for (int64_t k = 0; k < h * w; ++k) out[i * h * w + k] /= total;
  }
  res.heatmaps = Tensor::from_data({m, h, w}, std::move(out));
  return res;
}

namespace {

// y = x / sum(slice), per leading-axis slice of an (M, H, W) tensor.
Tensor div_by_slice_sum(const Tensor& x) {
  int64_t m = x.size(0);
  int64_t s = x.numel() / m;
  std::vector<double> out(x.numel());
  std::vector<double> sums(static_cast<size_t>(m));
  const double* xp = x.ptr();
  for (int64_t i = 0; i < m; ++i) {
    double t = 0.0;
    for (int64_t k = 0; k < s; ++k) t += xp[i * s + k];
    sums[static_cast<size_t>(i)] = t;
    for (int64_t k = 0; k < s; ++k) out[i * s + k] = xp[i * s + k] / t;
  }
  return Tensor::make_op(
      x.shape(), std::move(out), {x}, [m, s, sums](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        for (int64_t i = 0; i < m; ++i) {
          double dot = 0.0;
          for (int64_t k = 0; k < s; ++k)
            dot += self.grad[i * s + k] * self.value[i * s + k];
          double inv = 1.0 / sums[static_cast<size_t>(i)];
          for (int64_t k = 0; k < s; ++k)
            p->grad[i * s + k] += (self.grad[i * s + k] - dot) * inv;
        }
      });
}

Tensor add_const(const Tensor& x, double c) {
  std::vector<double> out(x.data());
  for (double& v : out) v += c;
  return Tensor::make_op(x.shape(), std::move(out), {x},
                         [](TensorNode& self) {
                           auto& p = self.parents[0];
                           if (!p->needs_grad) return;
                           for (size_t i = 0; i < self.grad.size(); ++i)
                             p->grad[i] += self.grad[i];
                         });
}

}  // namespace

Tensor normalize_heatmap(const Tensor& raw, double tau, HeatmapNorm mode) {
  if (tau <= 0) throw ConfigError("normalize_heatmap: tau must be positive");
  if (raw.dim() != 3)
    throw DimensionError("normalize_heatmap: expected (M,H,W), got " +
                         shape_str(raw.shape()));
  int64_t m = raw.size(0), h = raw.size(1), w = raw.size(2);
  if (mode == HeatmapNorm::Softmax) {
    Tensor flat = reshape(raw, {m, h * w});
    Tensor scaled = tau == 1.0 ? flat : scale(flat, 1.0 / tau);
    return reshape(softmax(scaled, 1), {m, h, w});
  }
  return div_by_slice_sum(add_const(relu(raw), 1e-12));
}

Tensor soft_argmax(const Tensor& heatmaps) {
  if (heatmaps.dim() != 3)
    throw DimensionError("soft_argmax: expected (M,H,W), got " +
                         shape_str(heatmaps.shape()));
  int64_t m = heatmaps.size(0), h = heatmaps.size(1), w = heatmaps.size(2);
  const double* hp = heatmaps.ptr();
  for (int64_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (int64_t k = 0; k < h * w; ++k) s += hp[i * h * w + k];
    if (std::fabs(s - 1.0) > 1e-6)
      throw ContractError(
          "soft_argmax: heatmap " + std::to_string(i) +
          " is not normalized (sum=" + std::to_string(s) +
          "); pass raw logits through normalize_heatmap first");
  }
  return matmul(reshape(heatmaps, {m, h * w}), coordinate_grid(h, w));
}

}  // namespace dvit
