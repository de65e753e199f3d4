#pragma once

#include <utility>
#include <vector>

#include "dvit/attention.hpp"
#include "dvit/config.hpp"

namespace dvit {

// Spatial-split branch: patch-embed conv -> encoder stack over patch tokens
// -> pixel shuffle back to the full (H, W) grid with C/2 channels.
struct SpatialVitParams {
  Conv2dLayer patch_embed;
  Tensor pos;
  std::vector<EncoderBlockParams> encoders;
  int64_t patch = 0;
  static SpatialVitParams create(const CascadeConfig& cfg, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

Tensor spatial_split_vit(const Tensor& x, const SpatialVitParams& p);

// Channel-split branch: stride-2 conv halves the grid, each channel becomes
// one token; encoder stack; r=2 pixel shuffle restores (H, W) with C/4
// channels.
struct ChannelVitParams {
  Conv2dLayer halve;
  Linear in_proj, out_proj;
  Tensor pos;
  std::vector<EncoderBlockParams> encoders;
  int64_t half_h = 0, half_w = 0;
  static ChannelVitParams create(const CascadeConfig& cfg, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

Tensor channel_split_vit(const Tensor& x, const ChannelVitParams& p);

// Residual convolution block applied to the channel concat of the branches.
struct FusionParams {
  Conv2dLayer shortcut;  // 1x1
  Conv2dLayer conv1, conv2;  // 3x3
  static FusionParams create(int64_t in_channels, int64_t out_channels,
                             Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

Tensor dvit_fuse(const std::vector<Tensor>& branch_outs, const FusionParams& p);

struct PredictionBlockParams {
  BlockKind kind = BlockKind::DVit;
  SpatialVitParams spatial;
  ChannelVitParams channel;
  FusionParams fuse;
  Conv2dLayer head;  // 1x1 conv, C -> M
  static PredictionBlockParams create(const CascadeConfig& cfg, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// The linear-combination supervision head: h_i = sum_m alpha_m^i f_m + b_i.
Tensor supervision_head(const Tensor& features, const Conv2dLayer& head);

// Returns (fused feature map for the next block, raw heatmap logits).
std::pair<Tensor, Tensor> prediction_block_forward(
    const Tensor& x, const PredictionBlockParams& p);

}  // namespace dvit
