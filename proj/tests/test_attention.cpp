#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dvit/attention.hpp"
#include "dvit/grad_check.hpp"
#include "dvit/ops.hpp"

using namespace dvit;

namespace {

Tensor randn(Shape s, Rng& rng, bool rg = false) {
  std::vector<double> v(static_cast<size_t>(shape_numel(s)));
  for (double& x : v) x = rng.normal();
  return Tensor::from_data(std::move(s), std::move(v), rg);
}

}  // namespace

TEST_CASE("uniform keys average the values") {
  Rng rng(1);
  Tensor q = randn({4, 3}, rng);
  Tensor k = Tensor::zeros({5, 3});
  Tensor v = randn({5, 3}, rng);
  Tensor out = scaled_dot_attention(q, k, v);
  for (int64_t i = 0; i < 4; ++i)
    for (int64_t j = 0; j < 3; ++j) {
      double mean = 0;
      for (int64_t l = 0; l < 5; ++l) mean += v.at({l, j});
      mean /= 5;
      CHECK(out.at({i, j}) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("single position returns its value row") {
  Rng rng(2);
  Tensor q = randn({1, 4}, rng), k = randn({1, 4}, rng), v = randn({1, 4}, rng);
  Tensor out = scaled_dot_attention(q, k, v);
  for (int64_t j = 0; j < 4; ++j)
    CHECK(out.at({0, j}) == doctest::Approx(v.at({0, j})).epsilon(1e-12));
}

TEST_CASE("attention rows are stochastic") {
  Rng rng(3);
  Tensor q = randn({6, 5}, rng), k = randn({7, 5}, rng);
  Tensor a = attention_weights(q, k);
  REQUIRE(a.shape() == Shape{6, 7});
  for (int64_t i = 0; i < 6; ++i) {
    double s = 0;
    for (int64_t j = 0; j < 7; ++j) {
      CHECK(a.at({i, j}) >= 0.0);
      s += a.at({i, j});
    }
    CHECK(std::fabs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("saturation picks the aligned value row") {
  // one key is strongly aligned with the query; weights collapse onto it
  Tensor q = Tensor::from_data({1, 2}, {100.0, 0.0});
  Tensor k = Tensor::from_data({3, 2}, {1, 0, 0, 1, -1, 0});
  Tensor v = Tensor::from_data({3, 2}, {10, 20, 30, 40, 50, 60});
  Tensor out = scaled_dot_attention(q, k, v);
  CHECK(out.at({0, 0}) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(out.at({0, 1}) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("scale factor is 1/sqrt(d)") {
  // with d=4 the logits are q.k/2; verify against a direct computation
  Rng rng(4);
  Tensor q = randn({2, 4}, rng), k = randn({3, 4}, rng);
  Tensor a = attention_weights(q, k);
  for (int64_t i = 0; i < 2; ++i) {
    double denom = 0;
    std::vector<double> logits(3);
    for (int64_t j = 0; j < 3; ++j) {
      double dot = 0;
      for (int64_t t = 0; t < 4; ++t) dot += q.at({i, t}) * k.at({j, t});
      logits[static_cast<size_t>(j)] = dot / 2.0;
    }
    double mx = std::max({logits[0], logits[1], logits[2]});
    for (double l : logits) denom += std::exp(l - mx);
    for (int64_t j = 0; j < 3; ++j)
      CHECK(a.at({i, j}) ==
            doctest::Approx(std::exp(logits[static_cast<size_t>(j)] - mx) /
                            denom)
                .epsilon(1e-9));
  }
}

TEST_CASE("multi-head with one head matches single-head projection math") {
  Rng rng(5);
  int64_t d = 6;
  AttentionParams p = AttentionParams::create(d, 1, rng);
  Tensor x = randn({4, d}, rng);
  Tensor manual = matmul(
      scaled_dot_attention(matmul(x, p.w_q), matmul(x, p.w_k),
                           matmul(x, p.w_v)),
      p.w_o);
  Tensor out = multi_head_attention(x, p);
  REQUIRE(out.shape() == manual.shape());
  for (int64_t i = 0; i < out.numel(); ++i)
    CHECK(out.data()[static_cast<size_t>(i)] ==
          doctest::Approx(manual.data()[static_cast<size_t>(i)])
              .epsilon(1e-10));
}

TEST_CASE("multi-head rejects indivisible head counts") {
  Rng rng(6);
  CHECK_THROWS_AS(AttentionParams::create(6, 4, rng), ConfigError);
}

TEST_CASE("head count changes the function") {
  Rng rng(7);
  int64_t d = 8;
  AttentionParams p1 = AttentionParams::create(d, 1, rng);
  AttentionParams p2 = p1;
  p2.n_heads = 4;
  Tensor x = randn({5, d}, rng);
  Tensor a = multi_head_attention(x, p1), b = multi_head_attention(x, p2);
  double diff = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    diff = std::max(diff, std::fabs(a.data()[static_cast<size_t>(i)] -
                                    b.data()[static_cast<size_t>(i)]));
  CHECK(diff > 1e-6);
}

TEST_CASE("encoder block token-permutation equivariance") {
  // without positional offsets the block commutes with token reordering
  Rng rng(8);
  int64_t L = 6, d = 8;
  EncoderBlockParams p = EncoderBlockParams::create(d, 2, 4, rng);
  Tensor x = randn({L, d}, rng);
  std::vector<int64_t> perm = {3, 0, 5, 1, 4, 2};
  std::vector<double> px(static_cast<size_t>(L * d));
  for (int64_t i = 0; i < L; ++i)
    for (int64_t j = 0; j < d; ++j)
      px[static_cast<size_t>(i * d + j)] =
          x.at({perm[static_cast<size_t>(i)], j});
  Tensor y = encoder_block(x, p);
  Tensor py = encoder_block(Tensor::from_data({L, d}, px), p);
  for (int64_t i = 0; i < L; ++i)
    for (int64_t j = 0; j < d; ++j)
      CHECK(py.at({i, j}) ==
            doctest::Approx(y.at({perm[static_cast<size_t>(i)], j}))
                .epsilon(1e-9));
}

TEST_CASE("positional embedding starts at zero and is learnable") {
  Tensor pos = positional_embedding(10, 8);
  CHECK(pos.requires_grad());
  for (double v : pos.data()) CHECK(v == 0.0);
}

TEST_CASE("gradients flow through attention and the encoder block") {
  Rng rng(9);
  Tensor q = randn({3, 4}, rng, true), k = randn({5, 4}, rng, true),
         v = randn({5, 4}, rng, true);
  auto rep = grad_check(
      [&] {
        Tensor y = scaled_dot_attention(q, k, v);
        return sum(mul(y, y));
      },
      {q, k, v});
  CHECK(rep.pass);

  int64_t d = 6;
  EncoderBlockParams p = EncoderBlockParams::create(d, 2, 2, rng);
  Tensor x = randn({3, d}, rng, true);
  std::vector<Tensor> inputs = {x, p.attn.w_q, p.attn.w_v, p.fc1.weight,
                                p.ln1.gain};
  auto rep2 = grad_check(
      [&] {
        Tensor y = encoder_block(x, p);
        return sum(mul(y, y));
      },
      inputs);
  CHECK_MESSAGE(rep2.pass, rep2.worst);
}
