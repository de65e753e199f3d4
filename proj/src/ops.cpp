#include "dvit/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace dvit {

namespace {

using MatMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                   Eigen::Dynamic,
                                                   Eigen::RowMajor>>;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// outer/len/inner decomposition around one axis
struct AxisView {
  int64_t outer = 1, len = 1, inner = 1;
};
AxisView axis_view(const Shape& s, int64_t axis) {
  AxisView v;
  for (int64_t i = 0; i < axis; ++i) v.outer *= s[static_cast<size_t>(i)];
  v.len = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i)
    v.inner *= s[i];
  return v;
}

int64_t norm_axis(const Tensor& x, int64_t axis, const char* op) {
  if (axis < 0) axis += x.dim();
  if (axis < 0 || axis >= x.dim())
    throw DimensionError(std::string(op) + ": axis out of range for " +
                         shape_str(x.shape()));
  return axis;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.data());
  const double* bp = b.ptr();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bp[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b},
                         [](TensorNode& self) {
                           for (auto& p : self.parents) {
                             if (!p->needs_grad) continue;
                             for (size_t i = 0; i < self.grad.size(); ++i)
                               p->grad[i] += self.grad[i];
                           }
                         });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.data());
  const double* bp = b.ptr();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bp[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b},
                         [](TensorNode& self) {
                           auto& pa = self.parents[0];
                           auto& pb = self.parents[1];
                           for (size_t i = 0; i < self.grad.size(); ++i) {
                             if (pa->needs_grad) pa->grad[i] += self.grad[i];
                             if (pb->needs_grad) pb->grad[i] -= self.grad[i];
                           }
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const double *ap = a.ptr(), *bp = b.ptr();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ap[i] * bp[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b},
                         [](TensorNode& self) {
                           auto& pa = self.parents[0];
                           auto& pb = self.parents[1];
                           for (size_t i = 0; i < self.grad.size(); ++i) {
                             if (pa->needs_grad)
                               pa->grad[i] += self.grad[i] * pb->value[i];
                             if (pb->needs_grad)
                               pb->grad[i] += self.grad[i] * pa->value[i];
                           }
                         });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.data());
  for (double& v : out) v *= c;
  return Tensor::make_op(a.shape(), std::move(out), {a},
                         [c](TensorNode& self) {
                           auto& p = self.parents[0];
                           if (!p->needs_grad) return;
                           for (size_t i = 0; i < self.grad.size(); ++i)
                             p->grad[i] += c * self.grad[i];
                         });
}

Tensor gelu(const Tensor& x) {
  constexpr double kSqrt2OverPi = 0.7978845608028654;
  constexpr double kCubic = 0.044715;
  std::vector<double> out(x.numel());
  const double* xp = x.ptr();
  for (size_t i = 0; i < out.size(); ++i) {
    double v = xp[i];
    double u = kSqrt2OverPi * (v + kCubic * v * v * v);
    out[i] = 0.5 * v * (1.0 + std::tanh(u));
  }
  return Tensor::make_op(
      x.shape(), std::move(out), {x}, [](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i) {
          double v = p->value[i];
          double u = 0.7978845608028654 * (v + 0.044715 * v * v * v);
          double t = std::tanh(u);
          double du = 0.7978845608028654 * (1.0 + 3.0 * 0.044715 * v * v);
          double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
          p->grad[i] += self.grad[i] * d;
        }
      });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  const double* xp = x.ptr();
  for (size_t i = 0; i < out.size(); ++i) out[i] = xp[i] > 0.0 ? xp[i] : 0.0;
  return Tensor::make_op(x.shape(), std::move(out), {x},
                         [](TensorNode& self) {
                           auto& p = self.parents[0];
                           if (!p->needs_grad) return;
                           for (size_t i = 0; i < self.grad.size(); ++i)
                             if (p->value[i] > 0.0)
                               p->grad[i] += self.grad[i];
                         });
}

Tensor reshape(const Tensor& x, Shape s) {
  if (shape_numel(s) != x.numel())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) +
                         " as " + shape_str(s));
  return Tensor::make_op(std::move(s), x.data(), {x},
                         [](TensorNode& self) {
                           auto& p = self.parents[0];
                           if (!p->needs_grad) return;
                           for (size_t i = 0; i < self.grad.size(); ++i)
                             p->grad[i] += self.grad[i];
                         });
}

Tensor transpose2d(const Tensor& x) {
  if (x.dim() != 2) throw DimensionError("transpose2d: need 2D tensor");
  int64_t n = x.size(0), m = x.size(1);
  std::vector<double> out(static_cast<size_t>(n * m));
  const double* xp = x.ptr();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) out[j * n + i] = xp[i * m + j];
  return Tensor::make_op({m, n}, std::move(out), {x},
                         [n, m](TensorNode& self) {
                           auto& p = self.parents[0];
                           if (!p->needs_grad) return;
                           for (int64_t i = 0; i < n; ++i)
                             for (int64_t j = 0; j < m; ++j)
                               p->grad[i * m + j] += self.grad[j * n + i];
                         });
}

Tensor concat(const std::vector<Tensor>& xs, int64_t axis) {
  if (xs.empty()) throw DimensionError("concat: empty input list");
  int64_t ax = norm_axis(xs[0], axis, "concat");
  Shape out_shape = xs[0].shape();
  int64_t total = 0;
  for (const auto& x : xs) {
    Shape s = x.shape();
    s[static_cast<size_t>(ax)] = out_shape[static_cast<size_t>(ax)];
    if (s != out_shape)
      throw DimensionError("concat: incompatible shape " +
                           shape_str(x.shape()));
    total += x.size(ax);
  }
  out_shape[static_cast<size_t>(ax)] = total;
  AxisView v = axis_view(out_shape, ax);

  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  std::vector<int64_t> offsets;  // start along axis per input
  int64_t off = 0;
  for (const auto& x : xs) {
    offsets.push_back(off);
    int64_t len = x.size(ax);
    const double* xp = x.ptr();
    for (int64_t o = 0; o < v.outer; ++o) {
      std::copy(xp + o * len * v.inner, xp + (o + 1) * len * v.inner,
                out.begin() + (o * total + off) * v.inner);
    }
    off += len;
  }
  return Tensor::make_op(
      out_shape, std::move(out), xs,
      [v, offsets, total](TensorNode& self) {
        for (size_t k = 0; k < self.parents.size(); ++k) {
          auto& p = self.parents[k];
          if (!p->needs_grad) continue;
          int64_t len =
              static_cast<int64_t>(p->value.size()) / (v.outer * v.inner);
          for (int64_t o = 0; o < v.outer; ++o)
            for (int64_t i = 0; i < len * v.inner; ++i)
              p->grad[o * len * v.inner + i] +=
                  self.grad[(o * total + offsets[k]) * v.inner + i];
        }
      });
}

Tensor narrow(const Tensor& x, int64_t axis, int64_t start, int64_t len) {
  int64_t ax = norm_axis(x, axis, "narrow");
  int64_t full = x.size(ax);
  if (start < 0 || len <= 0 || start + len > full)
    throw DimensionError("narrow: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of " +
                         std::to_string(full));
  Shape out_shape = x.shape();
  out_shape[static_cast<size_t>(ax)] = len;
  AxisView v = axis_view(x.shape(), ax);
  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  const double* xp = x.ptr();
  for (int64_t o = 0; o < v.outer; ++o)
    std::copy(xp + (o * full + start) * v.inner,
              xp + (o * full + start + len) * v.inner,
              out.begin() + o * len * v.inner);
  return Tensor::make_op(
      out_shape, std::move(out), {x},
      [v, full, start, len](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        for (int64_t o = 0; o < v.outer; ++o)
          for (int64_t i = 0; i < len * v.inner; ++i)
            p->grad[(o * full + start) * v.inner + i] +=
                self.grad[o * len * v.inner + i];
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() == 2 && b.dim() == 2) {
    int64_t n = a.size(0), k = a.size(1), k2 = b.size(0), m = b.size(1);
    if (k != k2)
      throw DimensionError("matmul: inner dimensions disagree " +
                           shape_str(a.shape()) + " x " +
                           shape_str(b.shape()));
    std::vector<double> out(static_cast<size_t>(n * m));
    ConstMatMap A(a.ptr(), n, k), B(b.ptr(), k, m);
    MatMap C(out.data(), n, m);
    C.noalias() = A * B;
    return Tensor::make_op(
        {n, m}, std::move(out), {a, b}, [n, k, m](TensorNode& self) {
          auto& pa = self.parents[0];
          auto& pb = self.parents[1];
          ConstMatMap G(self.grad.data(), n, m);
          if (pa->needs_grad) {
            ConstMatMap B(pb->value.data(), k, m);
            MatMap GA(pa->grad.data(), n, k);
            GA.noalias() += G * B.transpose();
          }
          if (pb->needs_grad) {
            ConstMatMap A(pa->value.data(), n, k);
            MatMap GB(pb->grad.data(), k, m);
            GB.noalias() += A.transpose() * G;
          }
        });
  }
  if (a.dim() == 3 && b.dim() == 3) {
    int64_t bs = a.size(0), n = a.size(1), k = a.size(2);
    if (b.size(0) != bs || b.size(1) != k)
      throw DimensionError("matmul: batched shapes disagree " +
                           shape_str(a.shape()) + " x " +
                           shape_str(b.shape()));
    int64_t m = b.size(2);
    std::vector<double> out(static_cast<size_t>(bs * n * m));
    for (int64_t i = 0; i < bs; ++i) {
      ConstMatMap A(a.ptr() + i * n * k, n, k), B(b.ptr() + i * k * m, k, m);
      MatMap C(out.data() + i * n * m, n, m);
      C.noalias() = A * B;
    }
    return Tensor::make_op(
        {bs, n, m}, std::move(out), {a, b},
        [bs, n, k, m](TensorNode& self) {
          auto& pa = self.parents[0];
          auto& pb = self.parents[1];
          for (int64_t i = 0; i < bs; ++i) {
            ConstMatMap G(self.grad.data() + i * n * m, n, m);
            if (pa->needs_grad) {
              ConstMatMap B(pb->value.data() + i * k * m, k, m);
              MatMap GA(pa->grad.data() + i * n * k, n, k);
              GA.noalias() += G * B.transpose();
            }
            if (pb->needs_grad) {
              ConstMatMap A(pa->value.data() + i * n * k, n, k);
              MatMap GB(pb->grad.data() + i * k * m, k, m);
              GB.noalias() += A.transpose() * G;
            }
          }
        });
  }
  throw DimensionError("matmul: unsupported ranks " + shape_str(a.shape()) +
                       " x " + shape_str(b.shape()));
}

Tensor softmax(const Tensor& x, int64_t axis) {
  int64_t ax = norm_axis(x, axis, "softmax");
  AxisView v = axis_view(x.shape(), ax);
  std::vector<double> out(x.numel());
  const double* xp = x.ptr();
  for (int64_t o = 0; o < v.outer; ++o) {
    for (int64_t i = 0; i < v.inner; ++i) {
      const int64_t base = o * v.len * v.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t l = 0; l < v.len; ++l)
        mx = std::max(mx, xp[base + l * v.inner]);
      double z = 0.0;
      for (int64_t l = 0; l < v.len; ++l) {
        double e = std::exp(xp[base + l * v.inner] - mx);
        out[base + l * v.inner] = e;
        z += e;
      }
      for (int64_t l = 0; l < v.len; ++l) out[base + l * v.inner] /= z;
    }
  }
  return Tensor::make_op(
      x.shape(), std::move(out), {x}, [v](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        for (int64_t o = 0; o < v.outer; ++o) {
          for (int64_t i = 0; i < v.inner; ++i) {
            const int64_t base = o * v.len * v.inner + i;
            double dot = 0.0;
            for (int64_t l = 0; l < v.len; ++l)
              dot += self.grad[base + l * v.inner] *
                     self.value[base + l * v.inner];
            for (int64_t l = 0; l < v.len; ++l)
              p->grad[base + l * v.inner] +=
                  self.value[base + l * v.inner] *
                  (self.grad[base + l * v.inner] - dot);
          }
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  if (x.dim() < 1) throw DimensionError("layer_norm: need at least 1D");
  int64_t d = x.size(x.dim() - 1);
  if (gain.numel() != d || bias.numel() != d)
    throw DimensionError("layer_norm: gain/bias length " +
                         std::to_string(gain.numel()) + "/" +
                         std::to_string(bias.numel()) +
                         " does not match last axis " + std::to_string(d));
  int64_t rows = x.numel() / d;
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> rstd(static_cast<size_t>(rows));
  const double *xp = x.ptr(), *gp = gain.ptr(), *bp = bias.ptr();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = xp + r * d;
    double mu = 0.0;
    for (int64_t j = 0; j < d; ++j) mu += row[j];
    mu /= d;
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= d;
    double rs = 1.0 / std::sqrt(var + eps);
    rstd[static_cast<size_t>(r)] = rs;
    for (int64_t j = 0; j < d; ++j) {
      double h = (row[j] - mu) * rs;
      xhat[r * d + j] = h;
      out[r * d + j] = gp[j] * h + bp[j];
    }
  }
  auto xhat_p = std::make_shared<std::vector<double>>(std::move(xhat));
  auto rstd_p = std::make_shared<std::vector<double>>(std::move(rstd));
  return Tensor::make_op(
      x.shape(), std::move(out), {x, gain, bias},
      [d, rows, xhat_p, rstd_p](TensorNode& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        const auto& xh = *xhat_p;
        for (int64_t r = 0; r < rows; ++r) {
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            double dy = self.grad[r * d + j];
            double dh = dy * pg->value[j];
            sum_dh += dh;
            sum_dh_h += dh * xh[r * d + j];
            if (pg->needs_grad) pg->grad[j] += dy * xh[r * d + j];
            if (pb->needs_grad) pb->grad[j] += dy;
          }
          if (px->needs_grad) {
            double rs = (*rstd_p)[static_cast<size_t>(r)];
            for (int64_t j = 0; j < d; ++j) {
              double dh = self.grad[r * d + j] * pg->value[j];
              px->grad[r * d + j] +=
                  rs * (dh - sum_dh / d - xh[r * d + j] * sum_dh_h / d);
            }
          }
        }
      });
}

namespace {

struct ConvDims {
  int64_t cin, h, w, cout, kh, kw, oh, ow, stride, pad;
};

void im2col(const double* x, const ConvDims& cd, double* col) {
  // col is (cin*kh*kw) x (oh*ow)
  for (int64_t c = 0; c < cd.cin; ++c)
    for (int64_t ki = 0; ki < cd.kh; ++ki)
      for (int64_t kj = 0; kj < cd.kw; ++kj) {
        double* dst =
            col + ((c * cd.kh + ki) * cd.kw + kj) * cd.oh * cd.ow;
        for (int64_t oi = 0; oi < cd.oh; ++oi) {
          int64_t ii = oi * cd.stride + ki - cd.pad;
          for (int64_t oj = 0; oj < cd.ow; ++oj) {
            int64_t jj = oj * cd.stride + kj - cd.pad;
            dst[oi * cd.ow + oj] =
                (ii >= 0 && ii < cd.h && jj >= 0 && jj < cd.w)
                    ? x[(c * cd.h + ii) * cd.w + jj]
                    : 0.0;
          }
        }
      }
}

void col2im_add(const double* col, const ConvDims& cd, double* gx) {
  for (int64_t c = 0; c < cd.cin; ++c)
    for (int64_t ki = 0; ki < cd.kh; ++ki)
      for (int64_t kj = 0; kj < cd.kw; ++kj) {
        const double* src =
            col + ((c * cd.kh + ki) * cd.kw + kj) * cd.oh * cd.ow;
        for (int64_t oi = 0; oi < cd.oh; ++oi) {
          int64_t ii = oi * cd.stride + ki - cd.pad;
          if (ii < 0 || ii >= cd.h) continue;
          for (int64_t oj = 0; oj < cd.ow; ++oj) {
            int64_t jj = oj * cd.stride + kj - cd.pad;
            if (jj < 0 || jj >= cd.w) continue;
            gx[(c * cd.h + ii) * cd.w + jj] += src[oi * cd.ow + oj];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int64_t stride, int64_t padding) {
  if (x.dim() != 3 || kernel.dim() != 4)
    throw DimensionError("conv2d: expected x (C,H,W) and kernel "
                         "(Cout,Cin,kh,kw), got " +
                         shape_str(x.shape()) + " / " +
                         shape_str(kernel.shape()));
  ConvDims cd;
  cd.cin = x.size(0);
  cd.h = x.size(1);
  cd.w = x.size(2);
  cd.cout = kernel.size(0);
  cd.kh = kernel.size(2);
  cd.kw = kernel.size(3);
  cd.stride = stride;
  cd.pad = padding;
  if (kernel.size(1) != cd.cin)
    throw DimensionError("conv2d: kernel expects " +
                         std::to_string(kernel.size(1)) +
                         " input channels, feature map has " +
                         std::to_string(cd.cin));
  if (cd.kh > cd.h + 2 * cd.pad || cd.kw > cd.w + 2 * cd.pad)
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) +
                         " larger than padded input " + shape_str(x.shape()));
  cd.oh = (cd.h + 2 * cd.pad - cd.kh) / cd.stride + 1;
  cd.ow = (cd.w + 2 * cd.pad - cd.kw) / cd.stride + 1;
  const bool with_bias = bias.defined();
  if (with_bias && bias.numel() != cd.cout)
    throw DimensionError("conv2d: bias length mismatch");

  const int64_t kdim = cd.cin * cd.kh * cd.kw;
  auto col = std::make_shared<std::vector<double>>(
      static_cast<size_t>(kdim * cd.oh * cd.ow));
  im2col(x.ptr(), cd, col->data());

  std::vector<double> out(static_cast<size_t>(cd.cout * cd.oh * cd.ow));
  {
    ConstMatMap W(kernel.ptr(), cd.cout, kdim);
    ConstMatMap Col(col->data(), kdim, cd.oh * cd.ow);
    MatMap Y(out.data(), cd.cout, cd.oh * cd.ow);
    Y.noalias() = W * Col;
  }
  if (with_bias) {
    const double* bp = bias.ptr();
    for (int64_t c = 0; c < cd.cout; ++c)
      for (int64_t i = 0; i < cd.oh * cd.ow; ++i)
        out[c * cd.oh * cd.ow + i] += bp[c];
  }

  std::vector<Tensor> parents = with_bias
                                    ? std::vector<Tensor>{x, kernel, bias}
                                    : std::vector<Tensor>{x, kernel};
  return Tensor::make_op(
      {cd.cout, cd.oh, cd.ow}, std::move(out), std::move(parents),
      [cd, kdim, col, with_bias](TensorNode& self) {
        auto& px = self.parents[0];
        auto& pk = self.parents[1];
        ConstMatMap G(self.grad.data(), cd.cout, cd.oh * cd.ow);
        if (pk->needs_grad) {
          ConstMatMap Col(col->data(), kdim, cd.oh * cd.ow);
          MatMap GW(pk->grad.data(), cd.cout, kdim);
          GW.noalias() += G * Col.transpose();
        }
        if (px->needs_grad) {
          std::vector<double> gcol(
              static_cast<size_t>(kdim * cd.oh * cd.ow));
          ConstMatMap W(pk->value.data(), cd.cout, kdim);
          MatMap GC(gcol.data(), kdim, cd.oh * cd.ow);
          GC.noalias() = W.transpose() * G;
          col2im_add(gcol.data(), cd, px->grad.data());
        }
        if (with_bias && self.parents[2]->needs_grad) {
          auto& pb = self.parents[2];
          for (int64_t c = 0; c < cd.cout; ++c) {
            double s = 0.0;
            for (int64_t i = 0; i < cd.oh * cd.ow; ++i)
              s += self.grad[c * cd.oh * cd.ow + i];
            pb->grad[c] += s;
          }
        }
      });
}

Tensor pixel_shuffle(const Tensor& x, int64_t r) {
  if (x.dim() != 3) throw DimensionError("pixel_shuffle: need (C,H,W)");
  int64_t c_in = x.size(0), h = x.size(1), w = x.size(2);
  if (r < 1 || c_in % (r * r) != 0)
    throw DimensionError("pixel_shuffle: channel count " +
                         std::to_string(c_in) + " not divisible by r^2=" +
                         std::to_string(r * r));
  int64_t c = c_in / (r * r);
  std::vector<double> out(x.numel());
  const double* xp = x.ptr();
  for (int64_t cc = 0; cc < c; ++cc)
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < r; ++j)
        for (int64_t y = 0; y < h; ++y)
          for (int64_t z = 0; z < w; ++z)
            out[(cc * h * r + y * r + i) * (w * r) + z * r + j] =
                xp[(((cc * r + i) * r + j) * h + y) * w + z];
  return Tensor::make_op(
      {c, h * r, w * r}, std::move(out), {x},
      [c, h, w, r](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < r; ++j)
              for (int64_t y = 0; y < h; ++y)
                for (int64_t z = 0; z < w; ++z)
                  p->grad[(((cc * r + i) * r + j) * h + y) * w + z] +=
                      self.grad[(cc * h * r + y * r + i) * (w * r) +
                                z * r + j];
      });
}

Tensor space_to_depth(const Tensor& x, int64_t r) {
  if (x.dim() != 3) throw DimensionError("space_to_depth: need (C,H,W)");
  int64_t c = x.size(0), hr = x.size(1), wr = x.size(2);
  if (r < 1 || hr % r != 0 || wr % r != 0)
    throw DimensionError("space_to_depth: spatial dims not divisible by r");
  int64_t h = hr / r, w = wr / r;
  std::vector<double> out(x.numel());
  const double* xp = x.ptr();
  for (int64_t cc = 0; cc < c; ++cc)
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < r; ++j)
        for (int64_t y = 0; y < h; ++y)
          for (int64_t z = 0; z < w; ++z)
            out[(((cc * r + i) * r + j) * h + y) * w + z] =
                xp[(cc * hr + y * r + i) * wr + z * r + j];
  return Tensor::make_op(
      {c * r * r, h, w}, std::move(out), {x},
      [c, h, w, r, hr, wr](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < r; ++j)
              for (int64_t y = 0; y < h; ++y)
                for (int64_t z = 0; z < w; ++z)
                  p->grad[(cc * hr + y * r + i) * wr + z * r + j] +=
                      self.grad[(((cc * r + i) * r + j) * h + y) * w + z];
      });
}

Tensor add_rows(const Tensor& x, const Tensor& row) {
  if (x.dim() != 2 || row.dim() != 1 || row.size(0) != x.size(1))
    throw DimensionError("add_rows: expected x (L,d) and row (d)");
  int64_t l = x.size(0), d = x.size(1);
  std::vector<double> out(x.data());
  const double* rp = row.ptr();
  for (int64_t i = 0; i < l; ++i)
    for (int64_t j = 0; j < d; ++j) out[i * d + j] += rp[j];
  return Tensor::make_op({l, d}, std::move(out), {x, row},
                         [l, d](TensorNode& self) {
                           auto& px = self.parents[0];
                           auto& pr = self.parents[1];
                           for (int64_t i = 0; i < l; ++i)
                             for (int64_t j = 0; j < d; ++j) {
                               double g = self.grad[i * d + j];
                               if (px->needs_grad)
                                 px->grad[i * d + j] += g;
                               if (pr->needs_grad) pr->grad[j] += g;
                             }
                         });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_op({}, {s}, {x}, [](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->needs_grad) return;
    for (double& g : p->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  double inv = 1.0 / static_cast<double>(x.numel());
  return Tensor::make_op({}, {s * inv}, {x}, [inv](TensorNode& self) {
    auto& p = self.parents[0];
    if (!p->needs_grad) return;
    for (double& g : p->grad) g += self.grad[0] * inv;
  });
}

}  // namespace dvit
