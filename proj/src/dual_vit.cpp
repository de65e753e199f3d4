#include "dvit/dual_vit.hpp"

namespace dvit {

SpatialVitParams SpatialVitParams::create(const CascadeConfig& cfg, Rng& rng) {
  SpatialVitParams p;
  p.patch = cfg.patch;
  int64_t d = cfg.spatial_width();
  p.patch_embed =
      Conv2dLayer::create(cfg.channels, d, cfg.patch, cfg.patch, 0, rng);
  p.pos = positional_embedding(cfg.spatial_tokens(), d);
  for (int64_t i = 0; i < cfg.enc_depth; ++i)
    p.encoders.push_back(
        EncoderBlockParams::create(d, cfg.heads, cfg.mlp_ratio, rng));
  return p;
}

void SpatialVitParams::visit(const std::string& prefix,
                             const ParamVisitor& v) {
  patch_embed.visit(prefix + ".patch_embed", v);
  v(prefix + ".pos", pos);
  for (size_t i = 0; i < encoders.size(); ++i)
    encoders[i].visit(prefix + ".enc" + std::to_string(i), v);
}

Tensor spatial_split_vit(const Tensor& x, const SpatialVitParams& p) {
  int64_t h = x.size(1), w = x.size(2);
  if (h % p.patch != 0 || w % p.patch != 0)
    throw ConfigError("spatial_split_vit: grid " + shape_str(x.shape()) +
                      " not divisible by patch " + std::to_string(p.patch));
  Tensor grid = p.patch_embed.forward(x);  // (d, H/p, W/p)
  int64_t d = grid.size(0), gh = grid.size(1), gw = grid.size(2);
  Tensor tokens = transpose2d(reshape(grid, {d, gh * gw}));  // (Np, d)
  tokens = add(tokens, p.pos);
  for (const auto& enc : p.encoders) tokens = encoder_block(tokens, enc);
  Tensor back = reshape(transpose2d(tokens), {d, gh, gw});
  return pixel_shuffle(back, p.patch);  // (d/p^2, H, W)
}

ChannelVitParams ChannelVitParams::create(const CascadeConfig& cfg, Rng& rng) {
  ChannelVitParams p;
  p.half_h = cfg.map_h / 2;
  p.half_w = cfg.map_w / 2;
  int64_t s = p.half_h * p.half_w;
  int64_t d = cfg.channel_width_eff();
  p.halve = Conv2dLayer::create(cfg.channels, cfg.channels, 3, 2, 1, rng);
  p.in_proj = Linear::create(s, d, rng);
  p.out_proj = Linear::create(d, s, rng);
  p.pos = positional_embedding(cfg.channels, d);
  for (int64_t i = 0; i < cfg.enc_depth; ++i)
    p.encoders.push_back(
        EncoderBlockParams::create(d, cfg.heads, cfg.mlp_ratio, rng));
  return p;
}

void ChannelVitParams::visit(const std::string& prefix,
                             const ParamVisitor& v) {
  halve.visit(prefix + ".halve", v);
  in_proj.visit(prefix + ".in_proj", v);
  out_proj.visit(prefix + ".out_proj", v);
  v(prefix + ".pos", pos);
  for (size_t i = 0; i < encoders.size(); ++i)
    encoders[i].visit(prefix + ".enc" + std::to_string(i), v);
}

Tensor channel_split_vit(const Tensor& x, const ChannelVitParams& p) {
  if (x.size(1) % 2 != 0 || x.size(2) % 2 != 0)
    throw ConfigError("channel_split_vit: H and W must be even, got " +
                      shape_str(x.shape()));
  int64_t c = x.size(0);
  Tensor half = p.halve.forward(x);  // (C, H/2, W/2)
  Tensor tokens = reshape(half, {c, p.half_h * p.half_w});  // one token/channel
  tokens = p.in_proj.forward(tokens);
  tokens = add(tokens, p.pos);
  for (const auto& enc : p.encoders) tokens = encoder_block(tokens, enc);
  tokens = p.out_proj.forward(tokens);
  Tensor back = reshape(tokens, {c, p.half_h, p.half_w});
  return pixel_shuffle(back, 2);  // (C/4, H, W)
}

FusionParams FusionParams::create(int64_t in_channels, int64_t out_channels,
                                  Rng& rng) {
  FusionParams p;
  p.shortcut = Conv2dLayer::create(in_channels, out_channels, 1, 1, 0, rng);
  p.conv1 = Conv2dLayer::create(in_channels, out_channels, 3, 1, 1, rng);
  p.conv2 = Conv2dLayer::create(out_channels, out_channels, 3, 1, 1, rng);
  return p;
}

void FusionParams::visit(const std::string& prefix, const ParamVisitor& v) {
  shortcut.visit(prefix + ".shortcut", v);
  conv1.visit(prefix + ".conv1", v);
  conv2.visit(prefix + ".conv2", v);
}

Tensor dvit_fuse(const std::vector<Tensor>& branch_outs,
                 const FusionParams& p) {
  if (branch_outs.empty())
    throw DimensionError("dvit_fuse: no branch outputs");
  for (size_t i = 1; i < branch_outs.size(); ++i)
    if (branch_outs[i].size(1) != branch_outs[0].size(1) ||
        branch_outs[i].size(2) != branch_outs[0].size(2))
      throw DimensionError("dvit_fuse: spatial sizes disagree: " +
                           shape_str(branch_outs[0].shape()) + " vs " +
                           shape_str(branch_outs[i].shape()));
  Tensor cat = branch_outs.size() == 1 ? branch_outs[0]
                                       : concat(branch_outs, 0);
  Tensor residual = p.conv2.forward(gelu(p.conv1.forward(cat)));
  return add(p.shortcut.forward(cat), residual);
}

PredictionBlockParams PredictionBlockParams::create(const CascadeConfig& cfg,
                                                    Rng& rng) {
  PredictionBlockParams p;
  p.kind = cfg.block_kind;
  int64_t fuse_in = 0;
  if (p.kind != BlockKind::ChannelOnly) {
    p.spatial = SpatialVitParams::create(cfg, rng);
    fuse_in += cfg.spatial_out_channels();
  }
  if (p.kind != BlockKind::SpatialOnly) {
    p.channel = ChannelVitParams::create(cfg, rng);
    fuse_in += cfg.channel_out_channels();
  }
  p.fuse = FusionParams::create(fuse_in, cfg.channels, rng);
  p.head = Conv2dLayer::create(cfg.channels, cfg.landmarks, 1, 1, 0, rng,
                               cfg.head_bias);
  // Small-started head: the first heatmaps are near-uniform after
  // normalization, which keeps the soft-argmax gradient well conditioned at
  // any depth (a full-scale head saturates the spatial softmax at init).
  for (double& w : p.head.weight.data()) w *= 1e-3;
  return p;
}

void PredictionBlockParams::visit(const std::string& prefix,
                                  const ParamVisitor& v) {
  if (kind != BlockKind::ChannelOnly) spatial.visit(prefix + ".spatial", v);
  if (kind != BlockKind::SpatialOnly) channel.visit(prefix + ".channel", v);
  fuse.visit(prefix + ".fuse", v);
  head.visit(prefix + ".head", v);
}

Tensor supervision_head(const Tensor& features, const Conv2dLayer& head) {
  return head.forward(features);
}

std::pair<Tensor, Tensor> prediction_block_forward(
    const Tensor& x, const PredictionBlockParams& p) {
  std::vector<Tensor> branches;
  if (p.kind != BlockKind::ChannelOnly)
    branches.push_back(spatial_split_vit(x, p.spatial));
  if (p.kind != BlockKind::SpatialOnly)
    branches.push_back(channel_split_vit(x, p.channel));
  Tensor fused = dvit_fuse(branches, p.fuse);
  Tensor heat = supervision_head(fused, p.head);
  return {fused, heat};
}

}  // namespace dvit
