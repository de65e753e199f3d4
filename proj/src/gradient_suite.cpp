#include "dvit/gradient_suite.hpp"

#include "dvit/cascade.hpp"
#include "dvit/heatmap.hpp"
#include "dvit/losses.hpp"
#include "dvit/trainer.hpp"

namespace dvit {

namespace {

Tensor random_tensor(Shape s, Rng& rng, double scl = 1.0) {
  std::vector<double> v(static_cast<size_t>(shape_numel(s)));
  for (double& x : v) x = rng.normal(0.0, scl);
  return Tensor::from_data(std::move(s), std::move(v), true);
}

}  // namespace

std::vector<SuiteEntry> run_gradient_suite(double tol, uint64_t seed) {
  std::vector<SuiteEntry> out;
  Rng rng = derived_rng(seed, 0x67726164ull);
  GradCheckOptions opt;
  opt.tol = tol;

  auto check = [&](const std::string& name, const std::function<Tensor()>& f,
                   const std::vector<Tensor>& inputs,
                   int64_t max_coords = 0) {
    GradCheckOptions o = opt;
    o.max_coords_per_tensor = max_coords;
    o.seed = seed;
    out.push_back({name, grad_check(f, inputs, o)});
  };

  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    check("matmul", [&] { return sum(matmul(a, b)); }, {a, b});
  }
  {
    Tensor x = random_tensor({3, 5}, rng);
    check("softmax", [&] { return sum(mul(softmax(x, 1), softmax(x, 1))); },
          {x});
  }
  {
    Tensor x = random_tensor({2, 5, 5}, rng);
    Tensor k = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    check("conv2d",
          [&] { return sum(mul(conv2d(x, k, b, 2, 1), conv2d(x, k, b, 2, 1))); },
          {x, k, b});
  }
  {
    Tensor x = random_tensor({4, 6}, rng);
    Tensor g = random_tensor({6}, rng), b = random_tensor({6}, rng);
    check("layer_norm",
          [&] {
            Tensor y = layer_norm(x, g, b);
            return sum(mul(y, y));
          },
          {x, g, b});
  }
  {
    Tensor x = random_tensor({8, 2, 2}, rng);
    check("pixel_shuffle",
          [&] {
            Tensor y = pixel_shuffle(x, 2);
            return sum(mul(y, y));
          },
          {x});
  }
  {
    Tensor x = Tensor::from_data({4}, {-2.0, -0.5, 0.3, 4.0}, true);
    check("gelu", [&] { return sum(mul(gelu(x), gelu(x))); }, {x});
  }
  {
    Tensor q = random_tensor({3, 4}, rng), k = random_tensor({3, 4}, rng),
           v = random_tensor({3, 4}, rng);
    check("scaled_dot_attention",
          [&] {
            Tensor y = scaled_dot_attention(q, k, v);
            return sum(mul(y, y));
          },
          {q, k, v});
  }
  {
    Rng mrng = derived_rng(seed, 1);
    AttentionParams p = AttentionParams::create(6, 2, mrng);
    Tensor x = random_tensor({4, 6}, rng);
    check("multi_head_attention",
          [&] {
            Tensor y = multi_head_attention(x, p);
            return sum(mul(y, y));
          },
          {x, p.w_q, p.w_k, p.w_v, p.w_o});
  }
  {
    Rng mrng = derived_rng(seed, 2);
    EncoderBlockParams p = EncoderBlockParams::create(6, 2, 2, mrng);
    Tensor x = random_tensor({4, 6}, rng);
    auto inputs = collect_params([&](const ParamVisitor& v) { p.visit("enc", v); });
    std::vector<Tensor> tensors{x};
    for (auto& [n, t] : inputs) tensors.push_back(*t);
    check("encoder_block",
          [&] {
            Tensor y = encoder_block(x, p);
            return sum(mul(y, y));
          },
          tensors);
  }
  {
    Tensor raw = random_tensor({2, 4, 4}, rng);
    check("soft_argmax",
          [&] {
            Tensor y = soft_argmax(normalize_heatmap(raw, 1.0));
            return sum(mul(y, y));
          },
          {raw});
  }
  {
    Tensor pred = random_tensor({3, 2}, rng, 2.0);
    Tensor target = random_tensor({3, 2}, rng, 2.0);
    check("smooth_l1", [&] { return smooth_l1(pred, target, 1.0); },
          {pred});
  }
  {
    Tensor pred = random_tensor({2, 4, 4}, rng, 0.3);
    Tensor target = random_tensor({2, 4, 4}, rng, 0.3);
    for (double& v : target.data()) v = std::fabs(v);
    AWingConfig aw;
    check("adaptive_wing", [&] { return adaptive_wing(pred, target, aw); },
          {pred});
  }

  // Stage loss on a 2-landmark toy.
  {
    Tensor raw = random_tensor({2, 4, 4}, rng);
    Tensor gt_lm = Tensor::from_data({2, 2}, {1.0, 1.5, 2.5, 2.0});
    Tensor gt_h = encode_gaussian(gt_lm, 4, 4, 1.0).heatmaps;
    CascadeConfig cfg = CascadeConfig::tiny();
    check("stage_loss",
          [&] {
            Tensor norm = normalize_heatmap(raw, cfg.tau, cfg.heatmap_norm);
            return stage_loss(soft_argmax(norm), gt_lm, norm, gt_h, cfg)
                .total;
          },
          {raw});
  }

  // Full objective through the whole cascade on the toy config. Parameter
  // tensors are spot-checked at sampled coordinates.
  {
    CascadeConfig cfg;
    cfg.blocks = 2;
    cfg.channels = 8;
    cfg.map_h = cfg.map_w = 8;
    cfg.landmarks = 3;
    cfg.resolution = 16;
    cfg.patch = 4;
    cfg.enc_depth = 1;
    cfg.heads = 2;
    cfg.seed = seed;
    CascadeParams model = CascadeParams::create(cfg);
    Tensor image = random_tensor({3, 16, 16}, rng, 0.5);
    Tensor gt_lm = Tensor::from_data({3, 2}, {2.0, 2.0, 5.0, 3.0, 3.5, 6.0});
    Tensor gt_h = encode_gaussian(gt_lm, 8, 8, cfg.sigma).heatmaps;
    auto named = collect_params([&](const ParamVisitor& v) { model.visit(v); });
    std::vector<Tensor> tensors{image};
    for (auto& [n, t] : named) tensors.push_back(*t);
    check("full_objective",
          [&] {
            CascadeOutput o = cascade_forward(image, model);
            return sample_loss(o, gt_lm, gt_h, cfg).total;
          },
          tensors, 3);
  }

  return out;
}

}  // namespace dvit
