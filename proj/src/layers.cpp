#include "dvit/layers.hpp"

#include <cmath>

namespace dvit {

Tensor init_normal(Shape s, double stddev, Rng& rng) {
  std::vector<double> data(static_cast<size_t>(shape_numel(s)));
  for (double& v : data) v = rng.normal(0.0, stddev);
  return Tensor::from_data(std::move(s), std::move(data), true);
}

Tensor init_fanin(Shape s, int64_t fan_in, Rng& rng) {
  return init_normal(std::move(s), std::sqrt(2.0 / static_cast<double>(fan_in)),
                     rng);
}

Linear Linear::create(int64_t in, int64_t out, Rng& rng, bool with_bias) {
  Linear l;
  l.weight = init_fanin({in, out}, in, rng);
  if (with_bias) l.bias = Tensor::zeros({out}, true);
  return l;
}

Tensor Linear::forward(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  if (bias.defined()) y = add_rows(y, bias);
  return y;
}

void Linear::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".weight", weight);
  if (bias.defined()) v(prefix + ".bias", bias);
}

LayerNormParams LayerNormParams::create(int64_t d) {
  LayerNormParams p;
  p.gain = Tensor::full({d}, 1.0, true);
  p.bias = Tensor::zeros({d}, true);
  return p;
}

Tensor LayerNormParams::forward(const Tensor& x) const {
  return layer_norm(x, gain, bias);
}

void LayerNormParams::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".gain", gain);
  v(prefix + ".bias", bias);
}

Conv2dLayer Conv2dLayer::create(int64_t in, int64_t out, int64_t k,
                                int64_t stride, int64_t padding, Rng& rng,
                                bool with_bias) {
  Conv2dLayer c;
  c.weight = init_fanin({out, in, k, k}, in * k * k, rng);
  if (with_bias) c.bias = Tensor::zeros({out}, true);
  c.stride = stride;
  c.padding = padding;
  return c;
}

Tensor Conv2dLayer::forward(const Tensor& x) const {
  return conv2d(x, weight, bias, stride, padding);
}

void Conv2dLayer::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".weight", weight);
  if (bias.defined()) v(prefix + ".bias", bias);
}

int64_t count_parameters_of(
    const std::function<void(const ParamVisitor&)>& visit_all) {
  int64_t total = 0;
  visit_all([&](const std::string&, Tensor& t) { total += t.numel(); });
  return total;
}

}  // namespace dvit
