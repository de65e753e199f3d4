#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dvit/cascade.hpp"
#include "dvit/gradient_suite.hpp"
#include "dvit/heatmap.hpp"
#include "dvit/losses.hpp"
#include "dvit/metrics.hpp"
#include "dvit/trainer.hpp"

using namespace dvit;
namespace fs = std::filesystem;

namespace {

void report(int criterion, bool pass, const std::string& what) {
  std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL",
              what.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", criterion, ": ", what);
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

Tensor randn(Shape s, Rng& rng, bool rg = false) {
  std::vector<double> v(static_cast<size_t>(shape_numel(s)));
  for (double& x : v) x = rng.normal();
  return Tensor::from_data(std::move(s), std::move(v), rg);
}

// Strips the wall-clock column so timing noise cannot break comparisons.
std::string drop_seconds_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    auto last = line.rfind(',');
    out << (last == std::string::npos ? line : line.substr(0, last)) << "\n";
  }
  return out.str();
}

}  // namespace

TEST_CASE("1: gradient suite at 1e-4 within two minutes") {
  auto t0 = std::chrono::steady_clock::now();
  auto suite = run_gradient_suite(1e-4, 0);
  double secs = seconds_since(t0);
  bool all = !suite.empty();
  std::string worst;
  for (const auto& e : suite) {
    if (!e.report.pass) {
      all = false;
      worst = e.name + ": " + e.report.worst;
    }
  }
  std::ostringstream os;
  os << suite.size() << " checks, " << secs << " s";
  if (!worst.empty()) os << ", first failure " << worst;
  report(1, all && secs < 120.0, os.str());
}

TEST_CASE("2: supervision head is an explicit channel linear combination") {
  Rng rng(2);
  CascadeConfig cfg = CascadeConfig::tiny();
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Conv2dLayer head =
        Conv2dLayer::create(cfg.channels, cfg.landmarks, 1, 1, 0, rng);
    Tensor f = randn({cfg.channels, cfg.map_h, cfg.map_w}, rng);
    Tensor h = supervision_head(f, head);
    int64_t hw = cfg.map_h * cfg.map_w;
    for (int64_t i = 0; i < cfg.landmarks; ++i)
      for (int64_t p = 0; p < hw; ++p) {
        double expect = head.bias.data()[static_cast<size_t>(i)];
        for (int64_t m = 0; m < cfg.channels; ++m)
          expect += head.weight.at({i, m, 0, 0}) *
                    f.data()[static_cast<size_t>(m * hw + p)];
        worst = std::max(worst,
                         std::fabs(h.data()[static_cast<size_t>(i * hw + p)] -
                                   expect));
      }
  }
  std::ostringstream os;
  os << "max deviation " << worst << " over 100 draws";
  report(2, worst < 1e-9, os.str());
}

TEST_CASE("3: attention weights row-stochastic; uniform keys average values") {
  Rng rng(3);
  double worst_row = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor q = randn({5, 4}, rng), k = randn({6, 4}, rng);
    Tensor a = attention_weights(q, k);
    for (int64_t i = 0; i < 5; ++i) {
      double s = 0;
      for (int64_t j = 0; j < 6; ++j) s += a.at({i, j});
      worst_row = std::max(worst_row, std::fabs(s - 1.0));
    }
  }
  Tensor q = randn({3, 4}, rng), v = randn({5, 4}, rng);
  Tensor out = scaled_dot_attention(q, Tensor::zeros({5, 4}), v);
  double worst_mean = 0.0;
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 4; ++j) {
      double mean = 0;
      for (int64_t l = 0; l < 5; ++l) mean += v.at({l, j});
      worst_mean = std::max(worst_mean, std::fabs(out.at({i, j}) - mean / 5));
    }
  std::ostringstream os;
  os << "row-sum deviation " << worst_row << ", value-mean deviation "
     << worst_mean;
  report(3, worst_row < 1e-9 && worst_mean < 1e-12, os.str());
}

TEST_CASE("4: soft-argmax one-hot exact; gaussian round trip within 0.1 px") {
  Tensor oneh = Tensor::zeros({1, 7, 7});
  oneh.data()[static_cast<size_t>(3 * 7 + 5)] = 1.0;
  Tensor mu = soft_argmax(oneh);
  bool exact = mu.at({0, 0}) == 5.0 && mu.at({0, 1}) == 3.0;

  Rng rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    double x = rng.uniform(4.5, 11.5), y = rng.uniform(4.5, 11.5);
    Tensor heat =
        encode_gaussian(Tensor::from_data({1, 2}, {x, y}), 16, 16, 1.5)
            .heatmaps;
    Tensor m = soft_argmax(heat);
    worst = std::max({worst, std::fabs(m.at({0, 0}) - x),
                      std::fabs(m.at({0, 1}) - y)});
  }
  std::ostringstream os;
  os << "one-hot exact=" << exact << ", worst round-trip error " << worst
     << " px";
  report(4, exact && worst < 0.1, os.str());
}

TEST_CASE("5: geometric stage weights for B=8, w=1.2") {
  auto w = stage_weights(8, 1.2);
  double worst = 0.0;
  for (int64_t j = 0; j < 8; ++j)
    worst = std::max(worst, std::fabs(w[static_cast<size_t>(j)] -
                                      std::pow(1.2, static_cast<double>(j) -
                                                        7.0)));
  double ratio = w.front() / w.back();
  std::ostringstream os;
  os << "max weight deviation " << worst << ", first/last ratio " << ratio;
  report(5, worst < 1e-12 && std::fabs(ratio - 0.279082) < 1e-5, os.str());
}

TEST_CASE("6: adaptive wing C1-continuous at the knot") {
  AWingConfig cfg;
  double worst_v = 0.0, worst_d = 0.0;
  for (double y : {0.0, 0.5, 1.0}) {
    // second-order one-sided differences at the knot itself
    double h = 1e-5;
    double x0 = y + cfg.theta;
    double f0 = awing_value(x0, y, cfg);
    double dlo = (3 * f0 - 4 * awing_value(x0 - h, y, cfg) +
                  awing_value(x0 - 2 * h, y, cfg)) /
                 (2 * h);
    double dhi = (-3 * f0 + 4 * awing_value(x0 + h, y, cfg) -
                  awing_value(x0 + 2 * h, y, cfg)) /
                 (2 * h);
    worst_d = std::max(worst_d, std::fabs(dhi - dlo));
    // one-sided limits of the value, extrapolated linearly to the knot
    double delta = 1e-6;
    double from_below = awing_value(x0 - delta, y, cfg) + delta * dlo;
    double from_above = awing_value(x0 + delta, y, cfg) - delta * dhi;
    worst_v = std::max({worst_v, std::fabs(from_below - f0),
                        std::fabs(from_above - f0)});
  }
  std::ostringstream os;
  os << "value jump " << worst_v << ", derivative jump " << worst_d;
  report(6, worst_v < 1e-9 && worst_d < 1e-6, os.str());
}

TEST_CASE("7: pixel shuffle bijection on 1000 random shapes") {
  Rng rng(7);
  bool ok = true;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    int64_t r = rng.uniform_int(1, 4);
    int64_t c = rng.uniform_int(1, 6) * r * r;
    int64_t h = rng.uniform_int(1, 6), w = rng.uniform_int(1, 6);
    Tensor x = randn({c, h, w}, rng);
    ok = space_to_depth(pixel_shuffle(x, r), r).data() == x.data();
  }
  report(7, ok, "bitwise round trip over 1000 shapes");
}

TEST_CASE("8: metrics match brute-force and Riemann oracles") {
  Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    int64_t m = rng.uniform_int(2, 8);
    Tensor pred = randn({m, 2}, rng), gt = randn({m, 2}, rng);
    double d_norm = rng.uniform(1.0, 10.0);
    double brute = 0;
    for (int64_t i = 0; i < m; ++i)
      brute += std::hypot(pred.at({i, 0}) - gt.at({i, 0}),
                          pred.at({i, 1}) - gt.at({i, 1}));
    brute = 100.0 * brute / (d_norm * static_cast<double>(m));
    worst = std::max(worst, std::fabs(nme(pred, gt, d_norm) - brute));
  }

  std::vector<double> nmes(41);
  for (double& v : nmes) v = rng.uniform(0.0, 16.0);
  double t = 10.0;
  int64_t fails = 0;
  for (double v : nmes) fails += (v > t);
  worst = std::max(worst, std::fabs(failure_rate(nmes, t) -
                                    100.0 * static_cast<double>(fails) /
                                        static_cast<double>(nmes.size())));

  const int64_t steps = 1000000;
  double riemann = 0.0;
  for (int64_t i = 0; i < steps; ++i) {
    double x = (static_cast<double>(i) + 0.5) * t / steps;
    int64_t count = 0;
    for (double v : nmes) count += (v <= x);
    riemann += static_cast<double>(count) / static_cast<double>(nmes.size());
  }
  riemann /= static_cast<double>(steps);
  double auc_err = std::fabs(auc_ced(nmes, t) - riemann);
  std::ostringstream os;
  os << "NME/FR deviation " << worst << ", AUC vs Riemann " << auc_err;
  report(8, worst < 1e-9 && auc_err < 1e-6, os.str());
}

TEST_CASE("9: desk-scale learnability inside the time budget") {
  auto t0 = std::chrono::steady_clock::now();
  CascadeConfig cfg = CascadeConfig::desk();
  cfg.seed = 0;
  fs::path data = fresh_dir("dvit_acc_desk_data");
  {
    auto samples =
        generate_synthetic(512, cfg.resolution, cfg.landmarks, cfg.seed);
    DatasetManifest man;
    man.resolution = cfg.resolution;
    man.seed = cfg.seed;
    save_dataset(samples, data.string(), man);
  }
  fs::path out = fresh_dir("dvit_acc_desk_run");
  TrainOptions opt;
  opt.quiet = true;
  TrainResult res = train(cfg, data.string(), out.string(), opt);
  double secs = seconds_since(t0);
  double first = res.epoch_total_loss.front();
  double last = res.epoch_total_loss.back();
  std::ostringstream os;
  os << "test NME " << res.report.nme << "%, loss " << first << " -> " << last
     << " (" << (100.0 * last / first) << "%), " << secs << " s";
  report(9, res.report.nme < 8.0 && last < 0.3 * first && secs < 900.0,
         os.str());
  fs::remove_all(data);
  fs::remove_all(out);
}

TEST_CASE("10: full ablation grid emitted deterministically") {
  CascadeConfig cfg = CascadeConfig::tiny();
  cfg.epochs = 1;
  fs::path data = fresh_dir("dvit_acc_abl_data");
  {
    auto samples =
        generate_synthetic(8, cfg.resolution, cfg.landmarks, cfg.seed);
    DatasetManifest man;
    man.resolution = cfg.resolution;
    man.seed = cfg.seed;
    save_dataset(samples, data.string(), man);
  }
  AblateAxes axes;  // the full default grid: 3 kinds x 3 connections x 4 x 4
  fs::path out_a = fresh_dir("dvit_acc_abl_a");
  fs::path out_b = fresh_dir("dvit_acc_abl_b");
  ablate(cfg, axes, data.string(), out_a.string());
  ablate(cfg, axes, data.string(), out_b.string());
  std::string a = slurp(out_a / "ablation.csv");
  std::string b = slurp(out_b / "ablation.csv");

  int rows = -1;  // exclude the header
  int failures = 0;
  std::istringstream in(a);
  std::string line;
  while (std::getline(in, line)) {
    ++rows;
    if (line.find("failed") != std::string::npos) ++failures;
  }
  bool ok = rows == 144 && failures == 0 &&
            drop_seconds_column(a) == drop_seconds_column(b);
  std::ostringstream os;
  os << rows << " cells, " << failures
     << " failures, repeat-run tables identical="
     << (drop_seconds_column(a) == drop_seconds_column(b));
  report(10, ok, os.str());
  fs::remove_all(data);
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST_CASE("11: parameter count is exactly affine in the block count") {
  CascadeConfig cfg = CascadeConfig::desk();
  std::vector<int64_t> counts;
  for (int64_t b = 1; b <= 8; ++b) {
    cfg.blocks = b;
    cfg.validate();
    CascadeParams p = CascadeParams::create(cfg);
    counts.push_back(count_parameters(p).total);
  }
  bool affine = true;
  int64_t delta = counts[1] - counts[0];
  for (size_t i = 2; i < counts.size(); ++i)
    affine = affine && (counts[i] - counts[i - 1] == delta);
  std::ostringstream os;
  os << "desk counts B=1..8 start " << counts.front() << ", per-block delta "
     << delta;
  report(11, affine, os.str());
}

TEST_CASE("12: identical runs produce bitwise-equal logs and checkpoints") {
  CascadeConfig cfg = CascadeConfig::tiny();
  cfg.epochs = 2;
  fs::path data = fresh_dir("dvit_acc_det_data");
  {
    auto samples =
        generate_synthetic(12, cfg.resolution, cfg.landmarks, cfg.seed);
    DatasetManifest man;
    man.resolution = cfg.resolution;
    man.seed = cfg.seed;
    save_dataset(samples, data.string(), man);
  }
  fs::path out_a = fresh_dir("dvit_acc_det_a");
  fs::path out_b = fresh_dir("dvit_acc_det_b");
  TrainOptions opt;
  opt.quiet = true;
  train(cfg, data.string(), out_a.string(), opt);
  train(cfg, data.string(), out_b.string(), opt);
  bool logs = slurp(out_a / "train.log") == slurp(out_b / "train.log");
  bool ckpts =
      slurp(out_a / "ckpt_final.bin") == slurp(out_b / "ckpt_final.bin");
  std::ostringstream os;
  os << "logs identical=" << logs << ", checkpoints identical=" << ckpts;
  report(12, logs && ckpts, os.str());
  fs::remove_all(data);
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}
