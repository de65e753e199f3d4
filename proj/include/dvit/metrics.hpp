#pragma once

#include <string>
#include <vector>

#include "dvit/tensor.hpp"

namespace dvit {

// Mean landmark error over a (M,2) pair, normalized by d_norm, in percent.
double nme(const Tensor& pred, const Tensor& gt, double d_norm);

// Percent of samples whose NME strictly exceeds t.
double failure_rate(const std::vector<double>& per_sample_nme, double t);

// Area under the empirical CDF of NME on [0, t], divided by t; exact
// step-function integration.
double auc_ced(const std::vector<double>& per_sample_nme, double t);

struct EvalReport {
  double nme = 0.0;  // mean over samples, percent
  double fr = 0.0;   // percent at threshold t
  double auc = 0.0;  // fraction at threshold t
  double threshold = 10.0;
  std::vector<double> ced;  // sorted per-sample NME
};

EvalReport make_eval_report(std::vector<double> per_sample_nme, double t);

// Comma-delimited "nme,fraction" pairs, 9 significant digits.
void ced_export(const std::vector<double>& per_sample_nme,
                const std::string& path);
std::vector<double> ced_parse(const std::string& path);

}  // namespace dvit
