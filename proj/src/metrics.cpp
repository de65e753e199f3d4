#include "dvit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dvit {

double nme(const Tensor& pred, const Tensor& gt, double d_norm) {
  if (d_norm <= 0) throw ContractError("nme: normalization distance must be positive");
  if (pred.shape() != gt.shape() || pred.dim() != 2 || pred.size(1) != 2)
    throw DimensionError("nme: expected matching (M,2) sets, got " +
                         shape_str(pred.shape()) + " vs " +
                         shape_str(gt.shape()));
  int64_t m = pred.size(0);
  double acc = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    double dx = pred.at({i, 0}) - gt.at({i, 0});
    double dy = pred.at({i, 1}) - gt.at({i, 1});
    acc += std::sqrt(dx * dx + dy * dy) / d_norm;
  }
  return 100.0 * acc / static_cast<double>(m);
}

double failure_rate(const std::vector<double>& per_sample_nme, double t) {
  if (per_sample_nme.empty()) throw ContractError("failure_rate: empty sample list");
  if (t <= 0) throw ContractError("failure_rate: threshold must be positive");
  int64_t fails = 0;
  for (double e : per_sample_nme)
    if (e > t) ++fails;  // NME exactly at t counts as a non-failure
  return 100.0 * static_cast<double>(fails) /
         static_cast<double>(per_sample_nme.size());
}

double auc_ced(const std::vector<double>& per_sample_nme, double t) {
  if (per_sample_nme.empty()) throw ContractError("auc_ced: empty sample list");
  if (t <= 0) throw ContractError("auc_ced: threshold must be positive");
  std::vector<double> e = per_sample_nme;
  std::sort(e.begin(), e.end());
  const double n = static_cast<double>(e.size());
  double integral = 0.0, prev = 0.0;
  for (size_t i = 0; i < e.size(); ++i) {
    double x = std::min(e[i], t);
    if (x > prev) {
      integral += (x - prev) * (static_cast<double>(i) / n);
      prev = x;
    }
  }
  if (prev < t) integral += (t - prev) * 1.0;
  return integral / t;
}

EvalReport make_eval_report(std::vector<double> per_sample_nme, double t) {
  EvalReport r;
  r.threshold = t;
  r.fr = failure_rate(per_sample_nme, t);
  r.auc = auc_ced(per_sample_nme, t);
  double s = 0.0;
  for (double e : per_sample_nme) s += e;
  r.nme = s / static_cast<double>(per_sample_nme.size());
  std::sort(per_sample_nme.begin(), per_sample_nme.end());
  r.ced = std::move(per_sample_nme);
  return r;
}

void ced_export(const std::vector<double>& per_sample_nme,
                const std::string& path) {
  std::vector<double> e = per_sample_nme;
  std::sort(e.begin(), e.end());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ced_export: cannot write " + path);
  out << "nme,fraction\n";
  out.precision(9);
  const double n = static_cast<double>(e.size());
  for (size_t i = 0; i < e.size(); ++i)
    out << e[i] << "," << (static_cast<double>(i + 1) / n) << "\n";
  if (!out) throw std::runtime_error("ced_export: write failed for " + path);
}

std::vector<double> ced_parse(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ced_parse: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "nme,fraction")
    throw std::runtime_error("ced_parse: bad header in " + path);
  std::vector<double> out;
  while (std::getline(in, line)) {
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("ced_parse: bad row in " + path + ": " + line);
    out.push_back(std::stod(line.substr(0, comma)));
  }
  return out;
}

}  // namespace dvit
