#pragma once

#include <map>
#include <optional>
#include <vector>

#include "dvit/dual_vit.hpp"

namespace dvit {

struct BottleneckParams {
  Conv2dLayer reduce, spatial, expand;  // 1x1, 3x3 (strided), 1x1
  Conv2dLayer down;                     // 1x1 shortcut when shape changes
  bool has_down = false;
  static BottleneckParams create(int64_t in, int64_t mid, int64_t out,
                                 int64_t stride, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

Tensor bottleneck_forward(const Tensor& x, const BottleneckParams& p);

// Small bottleneck-residual stack mapping (3, R, R) -> (C, H, W).
struct BackboneParams {
  Conv2dLayer stem;  // stride 2
  std::vector<BottleneckParams> stages;
  int64_t resolution = 0, out_h = 0, out_w = 0;
  static BackboneParams create(const CascadeConfig& cfg, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

Tensor backbone_forward(const Tensor& image, const BackboneParams& p);

// Connection strategies. connect_lsc's projection lives in CascadeParams.
Tensor connect_rescbsp(const Tensor& prev_in, const Tensor& prev_out);
Tensor connect_denc(const std::vector<Tensor>& all_prev_outs,
                    const Tensor& low);

struct CascadeParams {
  CascadeConfig cfg;
  BackboneParams backbone;
  std::vector<PredictionBlockParams> blocks;
  std::vector<Conv2dLayer> lsc_proj;  // blocks 2..B under LSC
  static CascadeParams create(const CascadeConfig& cfg);
  void visit(const ParamVisitor& v);
  // LSC combiner: concat(prev, low) -> 1x1 projection; prev absent for the
  // first block, whose input is the low-level features alone.
  Tensor connect_lsc(const Tensor& low, const std::optional<Tensor>& prev,
                     int64_t block_index) const;
};

struct CascadeOutput {
  std::vector<Tensor> heatmaps;  // B sets of raw logits (M, H, W)
  std::vector<Tensor> features;  // B fused block outputs (C, H, W)
  Tensor low;                    // backbone features
};

CascadeOutput cascade_forward(const Tensor& image, const CascadeParams& params);

struct ParamCount {
  int64_t total = 0;
  std::map<std::string, int64_t> by_module;  // top-level name component
};

ParamCount count_parameters(CascadeParams& params);

}  // namespace dvit
