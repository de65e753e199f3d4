#include "dvit/config.hpp"

#include <fstream>
#include <sstream>

namespace dvit {

const char* to_string(Connection c) {
  switch (c) {
    case Connection::LSC: return "lsc";
    case Connection::ResCBSP: return "rescbsp";
    case Connection::DenC: return "denc";
  }
  return "?";
}
const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::DVit: return "dvit";
    case BlockKind::SpatialOnly: return "spatial";
    case BlockKind::ChannelOnly: return "channel";
  }
  return "?";
}
const char* to_string(HeatmapNorm n) {
  return n == HeatmapNorm::Softmax ? "softmax" : "divsum";
}

Connection connection_from_string(const std::string& s) {
  if (s == "lsc") return Connection::LSC;
  if (s == "rescbsp") return Connection::ResCBSP;
  if (s == "denc") return Connection::DenC;
  throw ConfigError("unknown connection strategy: " + s);
}
BlockKind block_kind_from_string(const std::string& s) {
  if (s == "dvit") return BlockKind::DVit;
  if (s == "spatial") return BlockKind::SpatialOnly;
  if (s == "channel") return BlockKind::ChannelOnly;
  throw ConfigError("unknown block kind: " + s);
}
HeatmapNorm heatmap_norm_from_string(const std::string& s) {
  if (s == "softmax") return HeatmapNorm::Softmax;
  if (s == "divsum") return HeatmapNorm::DivideBySum;
  throw ConfigError("unknown heatmap normalizer: " + s);
}

void CascadeConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (blocks < 1) fail("blocks must be >= 1");
  if (channels < 4 || channels % 4 != 0)
    fail("channels must be a positive multiple of 4 (channel branch emits "
         "C/4 maps via r=2 pixel shuffle)");
  if (map_h < 2 || map_w < 2 || map_h % 2 != 0 || map_w % 2 != 0)
    fail("feature map H and W must be even (channel branch halves them)");
  if (patch < 1 || map_h % patch != 0 || map_w % patch != 0)
    fail("H and W must be divisible by the patch size");
  if (landmarks < 2) fail("need at least 2 landmarks (normalization pair)");
  if (resolution < map_h || resolution % map_h != 0)
    fail("resolution must be a multiple of the feature map height");
  if (heads < 1) fail("heads must be >= 1");
  if (spatial_width() % heads != 0)
    fail("spatial branch width " + std::to_string(spatial_width()) +
         " not divisible by head count");
  if (channel_width_eff() % heads != 0)
    fail("channel branch width " + std::to_string(channel_width_eff()) +
         " not divisible by head count");
  if (enc_depth < 1) fail("enc_depth must be >= 1");
  if (stage_w < 1.0) fail("stage weight w must satisfy w >= 1");
  if (sigma <= 0) fail("sigma must be positive");
  if (tau <= 0) fail("tau must be positive");
  if (smooth_delta <= 0) fail("smooth_delta must be positive");
  if (awing_alpha <= 1.0) fail("awing alpha must exceed 1");
  if (awing_omega <= 0 || awing_epsilon <= 0 || awing_theta <= 0)
    fail("awing omega/epsilon/theta must be positive");
  if (beta < 0) fail("beta must be nonnegative");
  if (lr <= 0) fail("lr must be positive");
  if (epochs < 0 || batch < 1) fail("bad training budget");
  if (lr_half_period < 1) fail("lr_half_period must be >= 1");
  if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
}

std::string CascadeConfig::canonical_text() const {
  std::map<std::string, std::string> kv;
  auto put_i = [&](const char* k, int64_t v) { kv[k] = std::to_string(v); };
  auto put_d = [&](const char* k, double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    kv[k] = os.str();
  };
  put_i("blocks", blocks);
  put_i("channels", channels);
  put_i("map_h", map_h);
  put_i("map_w", map_w);
  put_i("landmarks", landmarks);
  put_i("resolution", resolution);
  put_i("patch", patch);
  put_i("enc_depth", enc_depth);
  put_i("heads", heads);
  put_i("mlp_ratio", mlp_ratio);
  put_i("channel_width", channel_width);
  kv["connection"] = to_string(connection);
  kv["block_kind"] = to_string(block_kind);
  put_i("head_bias", head_bias ? 1 : 0);
  put_d("sigma", sigma);
  put_d("tau", tau);
  kv["heatmap_norm"] = to_string(heatmap_norm);
  put_d("beta", beta);
  put_d("stage_w", stage_w);
  put_d("smooth_delta", smooth_delta);
  put_d("awing_alpha", awing_alpha);
  put_d("awing_omega", awing_omega);
  put_d("awing_epsilon", awing_epsilon);
  put_d("awing_theta", awing_theta);
  put_d("lr", lr);
  put_i("lr_half_period", lr_half_period);
  put_i("epochs", epochs);
  put_i("batch", batch);
  put_i("checkpoint_every", checkpoint_every);
  put_i("seed", static_cast<int64_t>(seed));

  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  return os.str();
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t CascadeConfig::hash() const { return fnv1a(canonical_text()); }

CascadeConfig CascadeConfig::desk() { return CascadeConfig{}; }

CascadeConfig CascadeConfig::full() {
  CascadeConfig c;
  c.blocks = 8;
  c.channels = 256;
  c.map_h = c.map_w = 32;
  c.landmarks = 98;
  c.resolution = 256;
  c.enc_depth = 4;
  c.heads = 8;
  c.lr = 1e-4;
  c.epochs = 500;
  c.batch = 16;
  return c;
}

CascadeConfig CascadeConfig::tiny() {
  CascadeConfig c;
  c.blocks = 1;
  c.channels = 8;
  c.map_h = c.map_w = 8;
  c.landmarks = 2;
  c.resolution = 16;
  c.patch = 4;
  c.enc_depth = 1;
  c.heads = 2;
  c.epochs = 1;
  c.batch = 4;
  c.checkpoint_every = 1;
  return c;
}

void CascadeConfig::apply_override(const std::string& key,
                                   const std::string& value) {
  auto as_i = [&]() { return std::stoll(value); };
  auto as_d = [&]() { return std::stod(value); };
  if (key == "blocks") blocks = as_i();
  else if (key == "channels") channels = as_i();
  else if (key == "map_h") map_h = as_i();
  else if (key == "map_w") map_w = as_i();
  else if (key == "landmarks") landmarks = as_i();
  else if (key == "resolution") resolution = as_i();
  else if (key == "patch") patch = as_i();
  else if (key == "enc_depth") enc_depth = as_i();
  else if (key == "heads") heads = as_i();
  else if (key == "mlp_ratio") mlp_ratio = as_i();
  else if (key == "channel_width") channel_width = as_i();
  else if (key == "connection") connection = connection_from_string(value);
  else if (key == "block_kind") block_kind = block_kind_from_string(value);
  else if (key == "head_bias") head_bias = as_i() != 0;
  else if (key == "sigma") sigma = as_d();
  else if (key == "tau") tau = as_d();
  else if (key == "heatmap_norm") heatmap_norm = heatmap_norm_from_string(value);
  else if (key == "beta") beta = as_d();
  else if (key == "stage_w") stage_w = as_d();
  else if (key == "smooth_delta") smooth_delta = as_d();
  else if (key == "awing_alpha") awing_alpha = as_d();
  else if (key == "awing_omega") awing_omega = as_d();
  else if (key == "awing_epsilon") awing_epsilon = as_d();
  else if (key == "awing_theta") awing_theta = as_d();
  else if (key == "lr") lr = as_d();
  else if (key == "lr_half_period") lr_half_period = as_i();
  else if (key == "epochs") epochs = as_i();
  else if (key == "batch") batch = as_i();
  else if (key == "checkpoint_every") checkpoint_every = as_i();
  else if (key == "seed") seed = static_cast<uint64_t>(as_i());
  else if (key == "preset") {
    if (value == "desk") *this = desk();
    else if (value == "full") *this = full();
    else if (value == "tiny") *this = tiny();
    else throw ConfigError("unknown preset: " + value);
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

CascadeConfig CascadeConfig::from_text(const std::string& text) {
  CascadeConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not key=value: " + line);
    c.apply_override(line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

CascadeConfig CascadeConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return from_text(os.str());
}

void CascadeConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << canonical_text();
}

}  // namespace dvit
