#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dvit/cascade.hpp"
#include "dvit/heatmap.hpp"
#include "dvit/losses.hpp"
#include "dvit/metrics.hpp"
#include "dvit/ops.hpp"
#include "dvit/optim.hpp"

namespace py = pybind11;
using namespace dvit;

namespace {

Tensor make_tensor(const Shape& shape, const std::vector<double>& data) {
  return Tensor::from_data(shape, data);
}

using NestedD = std::vector<std::vector<double>>;

Tensor from_rows(const NestedD& rows) {
  if (rows.empty()) throw DimensionError("empty matrix");
  int64_t r = static_cast<int64_t>(rows.size());
  int64_t c = static_cast<int64_t>(rows[0].size());
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(r * c));
  for (const auto& row : rows) {
    if (static_cast<int64_t>(row.size()) != c)
      throw DimensionError("ragged matrix");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return Tensor::from_data({r, c}, std::move(flat));
}

NestedD to_rows(const Tensor& t) {
  if (t.dim() != 2) throw DimensionError("expected a 2-D tensor");
  NestedD out(static_cast<size_t>(t.size(0)),
              std::vector<double>(static_cast<size_t>(t.size(1))));
  for (int64_t i = 0; i < t.size(0); ++i)
    for (int64_t j = 0; j < t.size(1); ++j)
      out[static_cast<size_t>(i)][static_cast<size_t>(j)] = t.at({i, j});
  return out;
}

}  // namespace

PYBIND11_MODULE(dvitcore, m) {
  m.doc() = "Cascaded dual-ViT landmark detector: core numeric operations";

  py::register_exception<DimensionError>(m, "DimensionError");
  py::register_exception<ContractError>(m, "ContractError");
  py::register_exception<ConfigError>(m, "ConfigError");

  m.def("softmax", [](const std::vector<double>& x) {
    Tensor t = Tensor::from_data({static_cast<int64_t>(x.size())}, x);
    return softmax(t, 0).data();
  });

  m.def("matmul", [](const NestedD& a, const NestedD& b) {
    return to_rows(matmul(from_rows(a), from_rows(b)));
  });

  m.def("attention", [](const NestedD& q, const NestedD& k, const NestedD& v) {
    return to_rows(scaled_dot_attention(from_rows(q), from_rows(k),
                                        from_rows(v)));
  });

  m.def("gelu", [](const std::vector<double>& x) {
    Tensor t = Tensor::from_data({static_cast<int64_t>(x.size())}, x);
    return gelu(t).data();
  });

  m.def(
      "encode_gaussian",
      [](const NestedD& landmarks, int64_t h, int64_t w, double sigma) {
        auto res = encode_gaussian(from_rows(landmarks), h, w, sigma);
        return py::make_tuple(res.heatmaps.data(), res.clamped);
      },
      py::arg("landmarks"), py::arg("h"), py::arg("w"), py::arg("sigma"));

  m.def(
      "soft_argmax",
      [](const std::vector<double>& heat, int64_t m, int64_t h, int64_t w) {
        Tensor t = Tensor::from_data({m, h, w}, heat);
        return to_rows(soft_argmax(t));
      },
      py::arg("heatmaps"), py::arg("m"), py::arg("h"), py::arg("w"));

  m.def(
      "normalize_heatmap",
      [](const std::vector<double>& raw, int64_t m, int64_t h, int64_t w,
         double tau, const std::string& mode) {
        Tensor t = Tensor::from_data({m, h, w}, raw);
        return normalize_heatmap(t, tau, heatmap_norm_from_string(mode)).data();
      },
      py::arg("raw"), py::arg("m"), py::arg("h"), py::arg("w"),
      py::arg("tau") = 1.0, py::arg("mode") = "softmax");

  m.def("smooth_l1", [](const NestedD& pred, const NestedD& gt, double delta) {
    return smooth_l1(from_rows(pred), from_rows(gt), delta).item();
  });

  m.def(
      "adaptive_wing",
      [](const std::vector<double>& pred, const std::vector<double>& gt,
         int64_t m, int64_t h, int64_t w, double alpha, double omega,
         double epsilon, double theta) {
        AWingConfig cfg{alpha, omega, epsilon, theta};
        return adaptive_wing(Tensor::from_data({m, h, w}, pred),
                             Tensor::from_data({m, h, w}, gt), cfg)
            .item();
      },
      py::arg("pred"), py::arg("gt"), py::arg("m"), py::arg("h"), py::arg("w"),
      py::arg("alpha") = 2.1, py::arg("omega") = 14.0, py::arg("epsilon") = 1.0,
      py::arg("theta") = 0.5);

  m.def("stage_weights", &stage_weights, py::arg("blocks"), py::arg("w"));

  m.def("nme", [](const NestedD& pred, const NestedD& gt, double d_norm) {
    return nme(from_rows(pred), from_rows(gt), d_norm);
  });
  m.def("failure_rate", &failure_rate);
  m.def("auc_ced", &auc_ced);

  m.def("lr_schedule", &lr_schedule, py::arg("epoch"), py::arg("initial_lr"),
        py::arg("period") = 200);

  m.def("count_parameters", [](const std::string& preset, int64_t blocks) {
    CascadeConfig cfg = preset == "desk"   ? CascadeConfig::desk()
                        : preset == "full" ? CascadeConfig::full()
                                           : CascadeConfig::tiny();
    if (blocks > 0) cfg.blocks = blocks;
    cfg.validate();
    CascadeParams p = CascadeParams::create(cfg);
    return count_parameters(p).total;
  }, py::arg("preset") = "tiny", py::arg("blocks") = 0);
}
