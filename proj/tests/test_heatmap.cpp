#include <doctest.h>

#include <cmath>

#include "dvit/grad_check.hpp"
#include "dvit/heatmap.hpp"
#include "dvit/rng.hpp"

using namespace dvit;

TEST_CASE("coordinate grid layout") {
  Tensor g = coordinate_grid(3, 4);
  REQUIRE(g.shape() == Shape{12, 2});
  CHECK(g.at({0, 0}) == 0.0);   // x
  CHECK(g.at({0, 1}) == 0.0);   // y
  CHECK(g.at({1, 0}) == 1.0);   // one step right
  CHECK(g.at({4, 1}) == 1.0);   // one row down
  CHECK(g.at({11, 0}) == 3.0);
  CHECK(g.at({11, 1}) == 2.0);
}

TEST_CASE("one-hot heatmap recovers the peak exactly") {
  Tensor h = Tensor::zeros({1, 5, 5});
  h.data()[static_cast<size_t>(2 * 5 + 3)] = 1.0;  // row 2, col 3
  Tensor mu = soft_argmax(h);
  CHECK(mu.at({0, 0}) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(mu.at({0, 1}) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("two equal peaks land on the midpoint") {
  Tensor h = Tensor::zeros({1, 4, 4});
  h.data()[static_cast<size_t>(1 * 4 + 0)] = 0.5;
  h.data()[static_cast<size_t>(1 * 4 + 2)] = 0.5;
  Tensor mu = soft_argmax(h);
  CHECK(mu.at({0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mu.at({0, 1}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("soft_argmax rejects unnormalized input") {
  Tensor h = Tensor::full({1, 4, 4}, 1.0);
  CHECK_THROWS_AS(soft_argmax(h), ContractError);
}

TEST_CASE("encoded heatmaps are normalized") {
  Tensor lm = Tensor::from_data({2, 2}, {3.0, 4.0, 10.0, 2.0});
  EncodeResult res = encode_gaussian(lm, 16, 16, 1.5);
  CHECK(!res.clamped);
  for (int64_t i = 0; i < 2; ++i) {
    double s = 0;
    for (int64_t p = 0; p < 256; ++p)
      s += res.heatmaps.data()[static_cast<size_t>(i * 256 + p)];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("out-of-grid landmarks raise the clamped flag") {
  Tensor lm = Tensor::from_data({1, 2}, {-4.0, 30.0});
  EncodeResult res = encode_gaussian(lm, 16, 16, 1.5);
  CHECK(res.clamped);
  double s = 0;
  for (double v : res.heatmaps.data()) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gaussian encode/decode round trip within a tenth of a pixel") {
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    // keep a 3-sigma margin so mass is not clipped by the border
    double x = rng.uniform(4.5, 11.5), y = rng.uniform(4.5, 11.5);
    Tensor lm = Tensor::from_data({1, 2}, {x, y});
    EncodeResult res = encode_gaussian(lm, 16, 16, 1.5);
    Tensor mu = soft_argmax(res.heatmaps);
    CHECK(std::fabs(mu.at({0, 0}) - x) < 0.1);
    CHECK(std::fabs(mu.at({0, 1}) - y) < 0.1);
  }
}

TEST_CASE("encode is translation covariant away from borders") {
  Tensor a = encode_gaussian(Tensor::from_data({1, 2}, {6.0, 7.0}), 16, 16,
                             1.5)
                 .heatmaps;
  Tensor b = encode_gaussian(Tensor::from_data({1, 2}, {7.0, 7.0}), 16, 16,
                             1.5)
                 .heatmaps;
  // integer shift in x: values shift one column
  for (int64_t r = 0; r < 16; ++r)
    for (int64_t c = 4; c < 12; ++c)
      CHECK(b.data()[static_cast<size_t>(r * 16 + c)] ==
            doctest::Approx(a.data()[static_cast<size_t>(r * 16 + c - 1)])
                .epsilon(1e-6));
}

TEST_CASE("softmax normalization sums to one and respects temperature") {
  Rng rng(9);
  Tensor raw = Tensor::zeros({2, 4, 4});
  for (double& v : raw.data()) v = rng.normal();
  for (double tau : {0.5, 1.0, 3.0}) {
    Tensor h = normalize_heatmap(raw, tau, HeatmapNorm::Softmax);
    for (int64_t i = 0; i < 2; ++i) {
      double s = 0;
      for (int64_t p = 0; p < 16; ++p)
        s += h.data()[static_cast<size_t>(i * 16 + p)];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  // hotter temperature flattens the distribution
  Tensor cold = normalize_heatmap(raw, 0.25, HeatmapNorm::Softmax);
  Tensor hot = normalize_heatmap(raw, 4.0, HeatmapNorm::Softmax);
  double max_cold = 0, max_hot = 0;
  for (int64_t p = 0; p < 16; ++p) {
    max_cold = std::max(max_cold, cold.data()[static_cast<size_t>(p)]);
    max_hot = std::max(max_hot, hot.data()[static_cast<size_t>(p)]);
  }
  CHECK(max_cold > max_hot);
}

TEST_CASE("divide-by-sum normalization") {
  Tensor raw = Tensor::from_data({1, 2, 2}, {1.0, 3.0, -2.0, 0.0});
  Tensor h = normalize_heatmap(raw, 1.0, HeatmapNorm::DivideBySum);
  double s = 0;
  for (double v : h.data()) {
    CHECK(v >= 0.0);
    s += v;
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  // negative logits contribute (almost) nothing; a tiny floor keeps the
  // slice sum strictly positive
  CHECK(h.data()[2] <= 1e-12);
  CHECK(h.data()[1] == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("soft argmax stays inside the convex hull of the grid") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor raw = Tensor::zeros({3, 8, 8});
    for (double& v : raw.data()) v = rng.normal() * 3;
    Tensor mu = soft_argmax(normalize_heatmap(raw, 1.0));
    for (int64_t i = 0; i < 3; ++i) {
      CHECK(mu.at({i, 0}) >= 0.0);
      CHECK(mu.at({i, 0}) <= 7.0);
      CHECK(mu.at({i, 1}) >= 0.0);
      CHECK(mu.at({i, 1}) <= 7.0);
    }
  }
}

TEST_CASE("gradients flow through normalize + soft_argmax") {
  Rng rng(77);
  Tensor raw = Tensor::zeros({2, 5, 5}, true);
  for (double& v : raw.data()) v = rng.normal();
  for (HeatmapNorm mode : {HeatmapNorm::Softmax, HeatmapNorm::DivideBySum}) {
    auto rep = grad_check(
        [&] {
          Tensor mu = soft_argmax(normalize_heatmap(raw, 1.3, mode));
          return sum(mul(mu, mu));
        },
        {raw});
    CHECK_MESSAGE(rep.pass, rep.worst);
  }
}
