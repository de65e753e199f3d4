#pragma once

#include <functional>
#include <string>

#include "dvit/ops.hpp"
#include "dvit/rng.hpp"
#include "dvit/tensor.hpp"

namespace dvit {

// Every module exposes its parameters through this callback so the
// optimizer, checkpoints, and parameter counting share one traversal.
using ParamVisitor = std::function<void(const std::string&, Tensor&)>;

Tensor init_normal(Shape s, double stddev, Rng& rng);
Tensor init_fanin(Shape s, int64_t fan_in, Rng& rng);

struct Linear {
  Tensor weight;  // (in, out)
  Tensor bias;    // (out), optional
  static Linear create(int64_t in, int64_t out, Rng& rng, bool with_bias = true);
  Tensor forward(const Tensor& x) const;  // x (L,in) -> (L,out)
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct LayerNormParams {
  Tensor gain, bias;
  static LayerNormParams create(int64_t d);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct Conv2dLayer {
  Tensor weight;  // (out, in, k, k)
  Tensor bias;    // (out), optional
  int64_t stride = 1, padding = 0;
  static Conv2dLayer create(int64_t in, int64_t out, int64_t k, int64_t stride,
                            int64_t padding, Rng& rng, bool with_bias = true);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

int64_t count_parameters_of(const std::function<void(const ParamVisitor&)>& visit_all);

}  // namespace dvit
