#pragma once

#include <vector>

#include "dvit/tensor.hpp"

namespace dvit {

// Elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor gelu(const Tensor& x);  // tanh approximation
Tensor relu(const Tensor& x);

// Shape manipulation
Tensor reshape(const Tensor& x, Shape s);
Tensor transpose2d(const Tensor& x);
Tensor concat(const std::vector<Tensor>& xs, int64_t axis);
Tensor narrow(const Tensor& x, int64_t axis, int64_t start, int64_t len);

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);  // 2D, or batched 3D

// Neural primitives
Tensor softmax(const Tensor& x, int64_t axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);  // normalizes the last axis
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int64_t stride, int64_t padding);
Tensor pixel_shuffle(const Tensor& x, int64_t r);
Tensor space_to_depth(const Tensor& x, int64_t r);  // inverse of pixel_shuffle
Tensor add_rows(const Tensor& x, const Tensor& row);  // x[L,d] + row[d]

// Reductions
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace dvit
