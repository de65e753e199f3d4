#include "dvit/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dvit/rng.hpp"

namespace dvit {

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& inputs,
                           const GradCheckOptions& opt) {
  GradCheckReport rep;

  for (const auto& t : inputs) const_cast<Tensor&>(t).zero_grad();
  Tensor out = f();
  if (!std::isfinite(out.item())) {
    rep.nonfinite = true;
    rep.worst = "forward value is non-finite";
    return rep;
  }
  out.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : inputs) {
    analytic.push_back(const_cast<Tensor&>(t).grad());
  }

  Rng rng(opt.seed ^ 0xA5A5A5A5A5A5A5A5ull);
  const double h = opt.step;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor t = inputs[ti];
    std::vector<int64_t> coords;
    int64_t n = t.numel();
    if (opt.max_coords_per_tensor > 0 && n > opt.max_coords_per_tensor) {
      for (int64_t k = 0; k < opt.max_coords_per_tensor; ++k)
        coords.push_back(rng.uniform_int(0, n - 1));
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    } else {
      coords.resize(static_cast<size_t>(n));
      for (int64_t k = 0; k < n; ++k) coords[static_cast<size_t>(k)] = k;
    }
    for (int64_t c : coords) {
      double saved = t.data()[static_cast<size_t>(c)];
      t.data()[static_cast<size_t>(c)] = saved + h;
      double fp = f().item();
      t.data()[static_cast<size_t>(c)] = saved - h;
      double fm = f().item();
      t.data()[static_cast<size_t>(c)] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        rep.nonfinite = true;
        continue;
      }
      double numeric = (fp - fm) / (2.0 * h);
      double a = analytic[ti][static_cast<size_t>(c)];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-3});
      double rel = std::fabs(a - numeric) / denom;
      ++rep.checked_coords;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        std::ostringstream os;
        os << "tensor#" << ti << "[" << c << "]: analytic=" << a
           << " numeric=" << numeric;
        rep.worst = os.str();
      }
    }
  }
  rep.pass = !rep.nonfinite && rep.max_rel_err < opt.tol;
  return rep;
}

}  // namespace dvit
