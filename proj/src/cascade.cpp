#include "dvit/cascade.hpp"

namespace dvit {

BottleneckParams BottleneckParams::create(int64_t in, int64_t mid, int64_t out,
                                          int64_t stride, Rng& rng) {
  BottleneckParams p;
  p.reduce = Conv2dLayer::create(in, mid, 1, 1, 0, rng);
  p.spatial = Conv2dLayer::create(mid, mid, 3, stride, 1, rng);
  p.expand = Conv2dLayer::create(mid, out, 1, 1, 0, rng);
  p.has_down = (in != out) || (stride != 1);
  if (p.has_down) p.down = Conv2dLayer::create(in, out, 1, stride, 0, rng);
  return p;
}

void BottleneckParams::visit(const std::string& prefix, const ParamVisitor& v) {
  reduce.visit(prefix + ".reduce", v);
  spatial.visit(prefix + ".spatial", v);
  expand.visit(prefix + ".expand", v);
  if (has_down) down.visit(prefix + ".down", v);
}

Tensor bottleneck_forward(const Tensor& x, const BottleneckParams& p) {
  Tensor y = relu(p.reduce.forward(x));
  y = relu(p.spatial.forward(y));
  y = p.expand.forward(y);
  Tensor shortcut = p.has_down ? p.down.forward(x) : x;
  return relu(add(shortcut, y));
}

BackboneParams BackboneParams::create(const CascadeConfig& cfg, Rng& rng) {
  BackboneParams p;
  p.resolution = cfg.resolution;
  p.out_h = cfg.map_h;
  p.out_w = cfg.map_w;
  p.stem = Conv2dLayer::create(3, 16, 3, 2, 1, rng);
  // Distribute the remaining spatial reduction over four bottleneck stages.
  int64_t remaining = (cfg.resolution / 2) / cfg.map_h;
  std::vector<int64_t> widths = {16, 32, 64, cfg.channels};
  int64_t in = 16;
  for (int64_t w : widths) {
    int64_t stride = remaining > 1 ? 2 : 1;
    if (stride == 2) remaining /= 2;
    p.stages.push_back(
        BottleneckParams::create(in, std::max<int64_t>(w / 2, 4), w, stride,
                                 rng));
    in = w;
  }
  if (remaining > 1)
    throw ConfigError("backbone: cannot reduce resolution " +
                      std::to_string(cfg.resolution) + " to map height " +
                      std::to_string(cfg.map_h) +
                      " with the available stage strides");
  return p;
}

void BackboneParams::visit(const std::string& prefix, const ParamVisitor& v) {
  stem.visit(prefix + ".stem", v);
  for (size_t i = 0; i < stages.size(); ++i)
    stages[i].visit(prefix + ".stage" + std::to_string(i), v);
}

Tensor backbone_forward(const Tensor& image, const BackboneParams& p) {
  if (image.dim() != 3 || image.size(0) != 3 ||
      image.size(1) != p.resolution || image.size(2) != p.resolution)
    throw DimensionError("backbone: expected image (3," +
                         std::to_string(p.resolution) + "," +
                         std::to_string(p.resolution) + "), got " +
                         shape_str(image.shape()));
  Tensor y = relu(p.stem.forward(image));
  for (const auto& stage : p.stages) y = bottleneck_forward(y, stage);
  return y;
}

Tensor connect_rescbsp(const Tensor& prev_in, const Tensor& prev_out) {
  if (prev_in.shape() != prev_out.shape())
    throw DimensionError("connect_rescbsp: shape mismatch " +
                         shape_str(prev_in.shape()) + " vs " +
                         shape_str(prev_out.shape()));
  return add(prev_out, prev_in);
}

Tensor connect_denc(const std::vector<Tensor>& all_prev_outs,
                    const Tensor& low) {
  Tensor acc = low;
  for (const auto& f : all_prev_outs) {
    if (f.shape() != low.shape())
      throw DimensionError("connect_denc: shape mismatch " +
                           shape_str(f.shape()) + " vs " +
                           shape_str(low.shape()));
    acc = add(acc, f);
  }
  return acc;
}

CascadeParams CascadeParams::create(const CascadeConfig& cfg) {
  cfg.validate();
  CascadeParams p;
  p.cfg = cfg;
  Rng rng = derived_rng(cfg.seed, 0x6D6F64656Cull);  // model stream
  p.backbone = BackboneParams::create(cfg, rng);
  for (int64_t b = 0; b < cfg.blocks; ++b)
    p.blocks.push_back(PredictionBlockParams::create(cfg, rng));
  if (cfg.connection == Connection::LSC) {
    for (int64_t b = 1; b < cfg.blocks; ++b)
      p.lsc_proj.push_back(
          Conv2dLayer::create(2 * cfg.channels, cfg.channels, 1, 1, 0, rng));
  }
  return p;
}

void CascadeParams::visit(const ParamVisitor& v) {
  backbone.visit("backbone", v);
  for (size_t b = 0; b < blocks.size(); ++b)
    blocks[b].visit("block" + std::to_string(b), v);
  for (size_t b = 0; b < lsc_proj.size(); ++b)
    lsc_proj[b].visit("lsc" + std::to_string(b + 1), v);
}

Tensor CascadeParams::connect_lsc(const Tensor& low,
                                  const std::optional<Tensor>& prev,
                                  int64_t block_index) const {
  if (!prev.has_value()) return low;
  if (prev->shape() != low.shape())
    throw DimensionError("connect_lsc: shape mismatch " +
                         shape_str(prev->shape()) + " vs " +
                         shape_str(low.shape()));
  const Conv2dLayer& proj = lsc_proj.at(static_cast<size_t>(block_index - 1));
  return proj.forward(concat({*prev, low}, 0));
}

CascadeOutput cascade_forward(const Tensor& image,
                              const CascadeParams& params) {
  CascadeOutput out;
  out.low = backbone_forward(image, params.backbone);
  Tensor block_in;
  for (int64_t b = 0; b < params.cfg.blocks; ++b) {
    Tensor prev_in = block_in;
    switch (params.cfg.connection) {
      case Connection::LSC:
        block_in = b == 0 ? params.connect_lsc(out.low, std::nullopt, b)
                          : params.connect_lsc(out.low, out.features.back(), b);
        break;
      case Connection::ResCBSP:
        block_in = b == 0 ? out.low
                          : connect_rescbsp(prev_in, out.features.back());
        break;
      case Connection::DenC:
        block_in = connect_denc(out.features, out.low);
        break;
    }
    auto [fused, heat] = prediction_block_forward(
        block_in, params.blocks[static_cast<size_t>(b)]);
    out.features.push_back(fused);
    out.heatmaps.push_back(heat);
  }
  return out;
}

ParamCount count_parameters(CascadeParams& params) {
  ParamCount c;
  params.visit([&](const std::string& name, Tensor& t) {
    c.total += t.numel();
    auto dot = name.find('.');
    c.by_module[name.substr(0, dot)] += t.numel();
  });
  return c;
}

}  // namespace dvit
