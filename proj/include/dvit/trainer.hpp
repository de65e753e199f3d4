#pragma once

#include <string>
#include <vector>

#include "dvit/checkpoint.hpp"
#include "dvit/data_synth.hpp"
#include "dvit/heatmap.hpp"
#include "dvit/losses.hpp"
#include "dvit/metrics.hpp"

namespace dvit {

struct TrainOptions {
  std::string resume;  // checkpoint path; empty = start fresh
  AugmentRecipe recipe = AugmentRecipe::none();
  bool quiet = false;
  double eval_threshold = 10.0;
};

struct TrainResult {
  EvalReport report;       // final-stage evaluation on the test split
  TrainState state;
  std::vector<double> epoch_total_loss;
};

// Per-sample Eq-style objective: per-stage coordinate + heatmap losses with
// geometric stage weighting. Returns the stage reports and the total.
struct SampleLoss {
  std::vector<StageLossReport> stages;
  Tensor total;
};
SampleLoss sample_loss(const CascadeOutput& out, const Tensor& gt_landmarks_hm,
                       const Tensor& gt_heatmaps, const CascadeConfig& cfg);

TrainResult train(const CascadeConfig& cfg, const std::string& dataset_dir,
                  const std::string& out_dir, const TrainOptions& opt = {});

EvalReport evaluate_model(TrainState& state, const std::vector<Sample>& samples,
                          double threshold);

// Loads the checkpoint, evaluates the test split, writes eval.txt + ced.csv.
EvalReport evaluate_checkpoint(const std::string& ckpt_path,
                               const std::string& dataset_dir,
                               double threshold, const std::string& out_dir);

struct AblateAxes {
  std::vector<BlockKind> kinds = {BlockKind::SpatialOnly,
                                  BlockKind::ChannelOnly, BlockKind::DVit};
  std::vector<Connection> connections = {Connection::LSC, Connection::ResCBSP,
                                         Connection::DenC};
  std::vector<int64_t> blocks = {2, 4, 6, 8};
  std::vector<double> stage_ws = {1.0, 1.2, 1.4, 1.6};
};

// Trains every grid cell with identical seed and budget and appends one row
// per cell to <out_dir>/ablation.csv. Cell failures are recorded, not fatal.
void ablate(const CascadeConfig& base, const AblateAxes& axes,
            const std::string& dataset_dir, const std::string& out_dir,
            bool quiet = true);

}  // namespace dvit
