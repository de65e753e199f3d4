#include "dvit/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace dvit {

namespace {

double heatmap_scale(const CascadeConfig& cfg) {
  return static_cast<double>(cfg.map_h) / static_cast<double>(cfg.resolution);
}

Tensor landmarks_to_heatmap_units(const Tensor& lm, double s) {
  std::vector<double> v = lm.data();
  for (double& x : v) x *= s;
  return Tensor::from_data(lm.shape(), std::move(v));
}

double interocular(const Tensor& gt) {
  double dx = gt.at({0, 0}) - gt.at({1, 0});
  double dy = gt.at({0, 1}) - gt.at({1, 1});
  return std::sqrt(dx * dx + dy * dy);
}

void check_dataset_matches(const CascadeConfig& cfg,
                           const DatasetManifest& man) {
  if (man.resolution != cfg.resolution)
    throw ConfigError("dataset resolution " + std::to_string(man.resolution) +
                      " does not match config " +
                      std::to_string(cfg.resolution));
  if (man.landmarks != cfg.landmarks)
    throw ConfigError("dataset landmark count " +
                      std::to_string(man.landmarks) +
                      " does not match config " +
                      std::to_string(cfg.landmarks));
}

}  // namespace

SampleLoss sample_loss(const CascadeOutput& out, const Tensor& gt_landmarks_hm,
                       const Tensor& gt_heatmaps, const CascadeConfig& cfg) {
  SampleLoss sl;
  std::vector<Tensor> totals;
  for (const Tensor& raw : out.heatmaps) {
    Tensor norm = normalize_heatmap(raw, cfg.tau, cfg.heatmap_norm);
    Tensor mu = soft_argmax(norm);
    StageLossReport rep =
        stage_loss(mu, gt_landmarks_hm, norm, gt_heatmaps, cfg);
    totals.push_back(rep.total);
    sl.stages.push_back(std::move(rep));
  }
  sl.total = total_loss(totals, cfg.stage_w);
  return sl;
}

EvalReport evaluate_model(TrainState& state, const std::vector<Sample>& samples,
                          double threshold) {
  const CascadeConfig& cfg = state.model.cfg;
  const double s = heatmap_scale(cfg);
  std::vector<double> errors;
  errors.reserve(samples.size());
  for (const Sample& sample : samples) {
    CascadeOutput out = cascade_forward(sample.image, state.model);
    Tensor norm = normalize_heatmap(out.heatmaps.back(), cfg.tau,
                                    cfg.heatmap_norm);
    Tensor mu_hm = soft_argmax(norm);
    std::vector<double> pred = mu_hm.data();
    for (double& v : pred) v /= s;  // back to image pixels
    Tensor mu_img = Tensor::from_data(mu_hm.shape(), std::move(pred));
    errors.push_back(nme(mu_img, sample.landmarks, interocular(sample.landmarks)));
  }
  return make_eval_report(std::move(errors), threshold);
}

TrainResult train(const CascadeConfig& cfg, const std::string& dataset_dir,
                  const std::string& out_dir, const TrainOptions& opt) {
  cfg.validate();
  auto [samples, manifest] = load_dataset(dataset_dir);
  check_dataset_matches(cfg, manifest);
  auto [train_set, test_set] = split_by_parity(samples);
  if (train_set.empty()) throw ConfigError("train: empty training split");
  fs::create_directories(out_dir);

  TrainResult result;
  if (!opt.resume.empty()) {
    result.state = checkpoint_load(opt.resume);
    if (result.state.model.cfg.hash() != cfg.hash())
      throw CheckpointError(
          "train: resume checkpoint was produced under a different config "
          "(hash mismatch)");
  } else {
    result.state = TrainState::fresh(cfg);
  }
  TrainState& state = result.state;

  const double s = heatmap_scale(cfg);
  const bool augmenting = cfg.epochs > 0 &&
                          AugmentRecipe::none().hash() != opt.recipe.hash();

  // Static targets can be precomputed when no augmentation is active.
  std::vector<Tensor> gt_lm_hm(train_set.size()), gt_heat(train_set.size());
  if (!augmenting) {
    for (size_t i = 0; i < train_set.size(); ++i) {
      gt_lm_hm[i] = landmarks_to_heatmap_units(train_set[i].landmarks, s);
      gt_heat[i] =
          encode_gaussian(gt_lm_hm[i], cfg.map_h, cfg.map_w, cfg.sigma)
              .heatmaps;
    }
  }

  auto params = collect_params(
      [&](const ParamVisitor& v) { state.model.visit(v); });

  std::ofstream log(fs::path(out_dir) / "train.log",
                    state.epoch > 0 ? std::ios::app : std::ios::out);
  if (!log) throw std::runtime_error("train: cannot write train.log");
  log.precision(17);

  const size_t probe_n = std::min<size_t>(32, test_set.size());
  std::vector<Sample> probe(test_set.begin(),
                            test_set.begin() + static_cast<int64_t>(probe_n));
  double best_nme = std::numeric_limits<double>::infinity();

  for (int64_t epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    double lr = lr_schedule(epoch, cfg.lr, cfg.lr_half_period);
    AdamHyper hyper;
    hyper.lr = lr;

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = derived_rng(cfg.seed ^ 0x65706F6368ull,
                                  static_cast<uint64_t>(epoch) + 1);
    shuffle_rng.shuffle(order);

    std::vector<double> stage_sums(static_cast<size_t>(cfg.blocks), 0.0);
    double total_sum = 0.0;
    int64_t seen = 0;

    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch));
      double inv_batch = 1.0 / static_cast<double>(end - start);
      for (const auto& [name, t] : params) t->zero_grad();
      for (size_t k = start; k < end; ++k) {
        size_t i = order[k];
        Tensor image, lm_hm, heat;
        if (augmenting) {
          Sample aug = augment(train_set[i], opt.recipe,
                               cfg.seed ^ (static_cast<uint64_t>(epoch) << 20));
          image = aug.image;
          lm_hm = landmarks_to_heatmap_units(aug.landmarks, s);
          heat = encode_gaussian(lm_hm, cfg.map_h, cfg.map_w, cfg.sigma)
                     .heatmaps;
        } else {
          image = train_set[i].image;
          lm_hm = gt_lm_hm[i];
          heat = gt_heat[i];
        }
        CascadeOutput out = cascade_forward(image, state.model);
        SampleLoss sl = sample_loss(out, lm_hm, heat, cfg);
        scale(sl.total, inv_batch).backward();
        for (int64_t j = 0; j < cfg.blocks; ++j)
          stage_sums[static_cast<size_t>(j)] +=
              sl.stages[static_cast<size_t>(j)].total.item();
        total_sum += sl.total.item();
        ++seen;
      }
      if (state.adam.step(params, hyper)) ++state.step;
      else if (!opt.quiet)
        std::cerr << "step skipped: non-finite gradients at epoch " << epoch
                  << "\n";
    }

    std::ostringstream line;
    line.precision(17);
    line << epoch << "\t" << lr;
    for (int64_t j = 0; j < cfg.blocks; ++j)
      line << "\t" << stage_sums[static_cast<size_t>(j)] / seen;
    line << "\t" << total_sum / seen;
    log << line.str() << "\n";
    log.flush();
    if (!opt.quiet) std::cout << line.str() << std::endl;
    result.epoch_total_loss.push_back(total_sum / seen);

    state.epoch = epoch + 1;
    if (!probe.empty()) {
      EvalReport probe_rep = evaluate_model(state, probe, opt.eval_threshold);
      if (probe_rep.nme < best_nme) {
        best_nme = probe_rep.nme;
        checkpoint_save(state, (fs::path(out_dir) / "ckpt_best.bin").string());
      }
    }
    if ((epoch + 1) % cfg.checkpoint_every == 0)
      checkpoint_save(state,
                      (fs::path(out_dir) /
                       ("ckpt_epoch" + std::to_string(epoch + 1) + ".bin"))
                          .string());
  }

  checkpoint_save(state, (fs::path(out_dir) / "ckpt_final.bin").string());
  if (!test_set.empty()) {
    result.report = evaluate_model(state, test_set, opt.eval_threshold);
    ced_export(result.report.ced, (fs::path(out_dir) / "ced.csv").string());
  }
  return result;
}

EvalReport evaluate_checkpoint(const std::string& ckpt_path,
                               const std::string& dataset_dir,
                               double threshold, const std::string& out_dir) {
  TrainState state = checkpoint_load(ckpt_path);
  auto [samples, manifest] = load_dataset(dataset_dir);
  check_dataset_matches(state.model.cfg, manifest);
  auto [train_set, test_set] = split_by_parity(samples);
  if (test_set.empty()) throw ConfigError("evaluate: empty test split");
  EvalReport rep = evaluate_model(state, test_set, threshold);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    ced_export(rep.ced, (fs::path(out_dir) / "ced.csv").string());
    std::ofstream out(fs::path(out_dir) / "eval.txt");
    out.precision(9);
    out << "nme=" << rep.nme << "\n"
        << "fr=" << rep.fr << "\n"
        << "auc=" << rep.auc << "\n"
        << "threshold=" << rep.threshold << "\n"
        << "samples=" << rep.ced.size() << "\n";
  }
  return rep;
}

void ablate(const CascadeConfig& base, const AblateAxes& axes,
            const std::string& dataset_dir, const std::string& out_dir,
            bool quiet) {
  fs::create_directories(out_dir);
  std::ofstream table(fs::path(out_dir) / "ablation.csv");
  if (!table) throw std::runtime_error("ablate: cannot write ablation.csv");
  table << "cell,kind,connection,blocks,w,status,nme,fr,auc,params,seconds\n";
  table.precision(9);
  int64_t cell = 0;
  for (BlockKind kind : axes.kinds)
    for (Connection conn : axes.connections)
      for (int64_t b : axes.blocks)
        for (double w : axes.stage_ws) {
          CascadeConfig cfg = base;
          cfg.block_kind = kind;
          cfg.connection = conn;
          cfg.blocks = b;
          cfg.stage_w = w;
          std::string cell_dir =
              (fs::path(out_dir) / ("cell" + std::to_string(cell))).string();
          auto t0 = std::chrono::steady_clock::now();
          table << cell << "," << to_string(kind) << "," << to_string(conn)
                << "," << b << "," << w << ",";
          try {
            TrainOptions opt;
            opt.quiet = quiet;
            TrainResult res = train(cfg, dataset_dir, cell_dir, opt);
            ParamCount pc = count_parameters(res.state.model);
            double secs = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
            table << "ok," << res.report.nme << "," << res.report.fr << ","
                  << res.report.auc << "," << pc.total << "," << secs << "\n";
          } catch (const std::exception& e) {
            double secs = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
            std::string msg = e.what();
            for (char& c : msg)
              if (c == ',' || c == '\n') c = ';';
            table << "failed:" << msg << ",,,,," << secs << "\n";
          }
          table.flush();
          ++cell;
        }
}

}  // namespace dvit
