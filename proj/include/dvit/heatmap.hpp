#pragma once

#include "dvit/config.hpp"
#include "dvit/ops.hpp"

namespace dvit {

// Pixel-center grid for an (H, W) lattice: row k = r*W + c holds (x=c, y=r).
Tensor coordinate_grid(int64_t h, int64_t w);  // (H*W, 2), no grad

struct EncodeResult {
  Tensor heatmaps;      // (M, H, W), each summing to 1
  bool clamped = false;  // some landmark fell outside the grid
};

// Gaussian ground-truth heatmaps, normalized to unit mass per landmark.
// Landmark coordinates are in heatmap-pixel units.
EncodeResult encode_gaussian(const Tensor& landmarks, int64_t h, int64_t w,
                             double sigma);

// Spatial normalization of raw head logits: softmax at temperature tau, or
// plain divide-by-sum of shifted-positive values.
Tensor normalize_heatmap(const Tensor& raw, double tau,
                         HeatmapNorm mode = HeatmapNorm::Softmax);

// Expectation of grid coordinates under a normalized heatmap set (M, H, W);
// returns (M, 2) as (x, y). Differentiable.
Tensor soft_argmax(const Tensor& heatmaps);

}  // namespace dvit
