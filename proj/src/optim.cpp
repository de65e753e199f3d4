#include "dvit/optim.hpp"

#include <cmath>

namespace dvit {

bool Adam::step(const std::vector<std::pair<std::string, Tensor*>>& params,
                const AdamHyper& hyper) {
  for (const auto& [name, t] : params) {
    if (!t->has_grad())
      throw ContractError("adam: parameter " + name + " has no gradient");
    for (double g : t->grad())
      if (!std::isfinite(g)) {
        ++skipped_;
        return false;
      }
  }
  ++t_;
  double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t_));
  for (const auto& [name, t] : params) {
    AdamMoments& mom = moments_[name];
    size_t n = t->data().size();
    if (mom.m.empty()) {
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    }
    const auto& g = t->grad();
    auto& x = t->data();
    for (size_t i = 0; i < n; ++i) {
      mom.m[i] = hyper.beta1 * mom.m[i] + (1.0 - hyper.beta1) * g[i];
      mom.v[i] = hyper.beta2 * mom.v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      double mhat = mom.m[i] / bc1;
      double vhat = mom.v[i] / bc2;
      x[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
  }
  return true;
}

double lr_schedule(int64_t epoch, double initial_lr, int64_t period) {
  if (epoch < 0) throw ContractError("lr_schedule: negative epoch");
  if (period < 1) throw ConfigError("lr_schedule: period must be >= 1");
  return initial_lr * std::pow(0.5, static_cast<double>(epoch / period));
}

std::vector<std::pair<std::string, Tensor*>> collect_params(
    const std::function<void(const ParamVisitor&)>& visit_all) {
  std::vector<std::pair<std::string, Tensor*>> out;
  visit_all([&](const std::string& name, Tensor& t) {
    out.emplace_back(name, &t);
  });
  return out;
}

}  // namespace dvit
