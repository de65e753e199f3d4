#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dvit/cascade.hpp"
#include "dvit/grad_check.hpp"

using namespace dvit;

namespace {

Tensor randn(Shape s, Rng& rng, bool rg = false) {
  std::vector<double> v(static_cast<size_t>(shape_numel(s)));
  for (double& x : v) x = rng.normal();
  return Tensor::from_data(std::move(s), std::move(v), rg);
}

}  // namespace

TEST_CASE("backbone maps the image to the working grid") {
  CascadeConfig cfg = CascadeConfig::desk();
  Rng rng(1);
  BackboneParams p = BackboneParams::create(cfg, rng);
  Tensor img = randn({3, cfg.resolution, cfg.resolution}, rng);
  Tensor low = backbone_forward(img, p);
  CHECK(low.shape() == Shape{cfg.channels, cfg.map_h, cfg.map_w});
}

TEST_CASE("backbone works on the tiny preset too") {
  CascadeConfig cfg = CascadeConfig::tiny();
  Rng rng(2);
  BackboneParams p = BackboneParams::create(cfg, rng);
  Tensor img = randn({3, cfg.resolution, cfg.resolution}, rng);
  Tensor low = backbone_forward(img, p);
  CHECK(low.shape() == Shape{cfg.channels, cfg.map_h, cfg.map_w});
}

TEST_CASE("residual connection base cases") {
  Rng rng(3);
  Tensor a = randn({4, 3, 3}, rng), b = randn({4, 3, 3}, rng);
  Tensor y = connect_rescbsp(a, b);
  for (int64_t i = 0; i < y.numel(); ++i) {
    size_t u = static_cast<size_t>(i);
    CHECK(y.data()[u] == doctest::Approx(a.data()[u] + b.data()[u]));
  }
  // zero previous output degenerates to the previous input
  Tensor z = connect_rescbsp(a, Tensor::zeros(a.shape()));
  CHECK(z.data() == a.data());
}

TEST_CASE("dense connection sums every earlier output plus the low features") {
  Rng rng(4);
  Tensor low = randn({4, 3, 3}, rng);
  std::vector<Tensor> prevs = {randn({4, 3, 3}, rng), randn({4, 3, 3}, rng),
                               randn({4, 3, 3}, rng)};
  Tensor y = connect_denc(prevs, low);
  for (int64_t i = 0; i < y.numel(); ++i) {
    size_t u = static_cast<size_t>(i);
    double expect = low.data()[u];
    for (const Tensor& p : prevs) expect += p.data()[u];
    CHECK(y.data()[u] == doctest::Approx(expect).epsilon(1e-12));
  }
  // summation order does not matter
  std::vector<Tensor> rev = {prevs[2], prevs[0], prevs[1]};
  Tensor y2 = connect_denc(rev, low);
  for (int64_t i = 0; i < y.numel(); ++i)
    CHECK(y2.data()[static_cast<size_t>(i)] ==
          doctest::Approx(y.data()[static_cast<size_t>(i)]).epsilon(1e-12));

  // with no previous blocks DenC is just the low-level features
  CHECK(connect_denc({}, low).data() == low.data());
  // and with exactly one it coincides with the residual strategy
  Tensor d1 = connect_denc({prevs[0]}, low);
  Tensor r1 = connect_rescbsp(low, prevs[0]);
  CHECK(d1.data() == r1.data());
}

TEST_CASE("cascade forward emits one heatmap set per block") {
  for (Connection conn :
       {Connection::LSC, Connection::ResCBSP, Connection::DenC}) {
    CascadeConfig cfg = CascadeConfig::tiny();
    cfg.blocks = 3;
    cfg.connection = conn;
    cfg.validate();
    CascadeParams params = CascadeParams::create(cfg);
    Rng rng(5);
    Tensor img = randn({3, cfg.resolution, cfg.resolution}, rng);
    CascadeOutput out = cascade_forward(img, params);
    REQUIRE(out.heatmaps.size() == 3);
    REQUIRE(out.features.size() == 3);
    for (const Tensor& h : out.heatmaps)
      CHECK(h.shape() == Shape{cfg.landmarks, cfg.map_h, cfg.map_w});
    CHECK(out.low.shape() == Shape{cfg.channels, cfg.map_h, cfg.map_w});
  }
}

TEST_CASE("cascade forward is deterministic in the seed") {
  CascadeConfig cfg = CascadeConfig::tiny();
  cfg.seed = 99;
  CascadeParams a = CascadeParams::create(cfg);
  CascadeParams b = CascadeParams::create(cfg);
  Rng rng(6);
  Tensor img = randn({3, cfg.resolution, cfg.resolution}, rng);
  CascadeOutput oa = cascade_forward(img, a);
  CascadeOutput ob = cascade_forward(img, b);
  for (size_t i = 0; i < oa.heatmaps.size(); ++i)
    CHECK(oa.heatmaps[i].data() == ob.heatmaps[i].data());

  cfg.seed = 100;
  CascadeParams c = CascadeParams::create(cfg);
  CascadeOutput oc = cascade_forward(img, c);
  CHECK(oc.heatmaps[0].data() != oa.heatmaps[0].data());
}

TEST_CASE("LSC parameter count is affine in the number of blocks") {
  CascadeConfig cfg = CascadeConfig::tiny();
  cfg.connection = Connection::LSC;
  std::vector<int64_t> counts;
  for (int64_t b = 1; b <= 8; ++b) {
    cfg.blocks = b;
    cfg.validate();
    CascadeParams p = CascadeParams::create(cfg);
    counts.push_back(count_parameters(p).total);
  }
  for (size_t i = 2; i < counts.size(); ++i)
    CHECK(counts[i] - counts[i - 1] == counts[i - 1] - counts[i - 2]);
  CHECK(counts[1] > counts[0]);
}

TEST_CASE("non-LSC strategies carry no combiner parameters") {
  CascadeConfig cfg = CascadeConfig::tiny();
  cfg.blocks = 4;
  cfg.connection = Connection::ResCBSP;
  CascadeParams a = CascadeParams::create(cfg);
  CHECK(a.lsc_proj.empty());
  cfg.connection = Connection::LSC;
  CascadeParams b = CascadeParams::create(cfg);
  CHECK(b.lsc_proj.size() == 3);
  CHECK(count_parameters(b).total > count_parameters(a).total);
}

TEST_CASE("parameter breakdown accounts for every tensor") {
  CascadeConfig cfg = CascadeConfig::tiny();
  cfg.blocks = 2;
  CascadeParams p = CascadeParams::create(cfg);
  ParamCount pc = count_parameters(p);
  int64_t from_modules = 0;
  for (const auto& [name, n] : pc.by_module) from_modules += n;
  CHECK(from_modules == pc.total);
  CHECK(pc.by_module.count("backbone") == 1);
}

TEST_CASE("LSC combiner depends on the low-level features") {
  // the first block sees the backbone output alone; later blocks mix in the
  // previous block's features through the learned projection
  CascadeConfig cfg = CascadeConfig::tiny();
  cfg.blocks = 2;
  cfg.connection = Connection::LSC;
  CascadeParams p = CascadeParams::create(cfg);
  Rng rng(7);
  Tensor low = randn({cfg.channels, cfg.map_h, cfg.map_w}, rng);
  Tensor prev = randn({cfg.channels, cfg.map_h, cfg.map_w}, rng);
  Tensor first = p.connect_lsc(low, std::nullopt, 0);
  CHECK(first.data() == low.data());
  Tensor second = p.connect_lsc(low, prev, 1);
  CHECK(second.shape() == low.shape());

  Tensor prev2 = randn({cfg.channels, cfg.map_h, cfg.map_w}, rng);
  Tensor second2 = p.connect_lsc(low, prev2, 1);
  double diff = 0;
  for (int64_t i = 0; i < second.numel(); ++i)
    diff = std::max(diff, std::fabs(second.data()[static_cast<size_t>(i)] -
                                    second2.data()[static_cast<size_t>(i)]));
  CHECK(diff > 1e-9);
}

TEST_CASE("bottleneck gradients and shortcut shapes") {
  Rng rng(8);
  BottleneckParams p = BottleneckParams::create(4, 2, 6, 2, rng);
  Tensor x = randn({4, 6, 6}, rng, true);
  Tensor y = bottleneck_forward(x, p);
  CHECK(y.shape() == Shape{6, 3, 3});

  GradCheckOptions opt;
  opt.max_coords_per_tensor = 8;
  auto rep = grad_check(
      [&] {
        Tensor z = bottleneck_forward(x, p);
        return sum(mul(z, z));
      },
      {x, p.reduce.weight, p.spatial.weight, p.expand.weight}, opt);
  CHECK_MESSAGE(rep.pass, rep.worst);
}
