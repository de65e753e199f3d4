#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dvit/tensor.hpp"

namespace dvit {

enum class Connection { LSC, ResCBSP, DenC };
enum class BlockKind { DVit, SpatialOnly, ChannelOnly };
enum class HeatmapNorm { Softmax, DivideBySum };

const char* to_string(Connection c);
const char* to_string(BlockKind k);
const char* to_string(HeatmapNorm n);
Connection connection_from_string(const std::string& s);
BlockKind block_kind_from_string(const std::string& s);
HeatmapNorm heatmap_norm_from_string(const std::string& s);

// One record for every architecture, loss, and training knob. Serialized as
// sorted key=value lines; the hash of that canonical text ties checkpoints,
// logs, and evaluation together.
struct CascadeConfig {
  // architecture
  int64_t blocks = 2;        // B
  int64_t channels = 32;     // C
  int64_t map_h = 16, map_w = 16;
  int64_t landmarks = 5;     // M
  int64_t resolution = 64;   // input image R
  int64_t patch = 4;         // spatial-branch patch size
  int64_t enc_depth = 2;     // encoder blocks per ViT branch
  int64_t heads = 4;
  int64_t mlp_ratio = 4;
  int64_t channel_width = 0;  // channel-branch d_model; 0 = (H/2)*(W/2)
  Connection connection = Connection::LSC;
  BlockKind block_kind = BlockKind::DVit;
  bool head_bias = true;

  // heatmap codec
  double sigma = 1.5;
  double tau = 1.0;
  HeatmapNorm heatmap_norm = HeatmapNorm::Softmax;

  // losses
  double beta = 0.5;
  double stage_w = 1.2;      // w of the geometric stage weighting
  double smooth_delta = 1.0;
  double awing_alpha = 2.1;
  double awing_omega = 14.0;
  double awing_epsilon = 1.0;
  double awing_theta = 0.5;

  // training
  double lr = 1e-3;
  int64_t lr_half_period = 200;
  int64_t epochs = 10;
  int64_t batch = 8;
  int64_t checkpoint_every = 5;
  uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  std::string canonical_text() const;
  uint64_t hash() const;  // FNV-1a of canonical_text()

  static CascadeConfig desk();
  static CascadeConfig full();
  static CascadeConfig tiny();  // for fast tests / ablation smoke budgets

  static CascadeConfig from_text(const std::string& text);
  static CascadeConfig from_file(const std::string& path);
  void apply_override(const std::string& key, const std::string& value);
  void save(const std::string& path) const;

  // derived sizes
  int64_t spatial_out_channels() const { return channels / 2; }
  int64_t channel_out_channels() const { return channels / 4; }
  int64_t spatial_width() const {  // branch d_model
    return spatial_out_channels() * patch * patch;
  }
  int64_t channel_width_eff() const {
    return channel_width > 0 ? channel_width : (map_h / 2) * (map_w / 2);
  }
  int64_t spatial_tokens() const { return (map_h / patch) * (map_w / patch); }
};

uint64_t fnv1a(const std::string& s);

}  // namespace dvit
