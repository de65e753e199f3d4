#include "dvit/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dvit/config.hpp"

namespace fs = std::filesystem;

namespace dvit {

namespace {

constexpr double kPalette[8][3] = {
    {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0},           {0.0, 0.0, 1.0},
    {0.7071, 0.7071, 0.0}, {0.7071, 0.0, 0.7071}, {0.0, 0.7071, 0.7071},
    {0.8018, 0.5345, 0.2673}, {0.2673, 0.5345, 0.8018}};

// Loose face-like canonical arrangement in unit coordinates; landmarks 0/1
// form the interocular normalization pair.
std::pair<double, double> canonical_position(int64_t i, int64_t m) {
  switch (i) {
    case 0: return {0.30, 0.35};
    case 1: return {0.70, 0.35};
    case 2: return {0.50, 0.55};
    case 3: return {0.35, 0.75};
    case 4: return {0.65, 0.75};
    default: break;
  }
  // Extras on an ellipse around the face region.
  double t = 2.0 * M_PI * static_cast<double>(i - 5) /
             static_cast<double>(std::max<int64_t>(m - 5, 1));
  return {0.5 + 0.32 * std::cos(t), 0.55 + 0.30 * std::sin(t)};
}

void render_blob(std::vector<double>& img, int64_t r, double cx, double cy,
                 double sigma, const double* color, double amp) {
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(cx - 4 * sigma));
  int64_t x1 = std::min<int64_t>(r - 1, static_cast<int64_t>(cx + 4 * sigma) + 1);
  int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(cy - 4 * sigma));
  int64_t y1 = std::min<int64_t>(r - 1, static_cast<int64_t>(cy + 4 * sigma) + 1);
  for (int64_t y = y0; y <= y1; ++y)
    for (int64_t x = x0; x <= x1; ++x) {
      double dx = static_cast<double>(x) - cx;
      double dy = static_cast<double>(y) - cy;
      double g = amp * std::exp(-(dx * dx + dy * dy) * inv2s2);
      for (int64_t ch = 0; ch < 3; ++ch)
        img[(ch * r + y) * r + x] += color[ch] * g;
    }
}

}  // namespace

const double* palette_color(int64_t landmark_index) {
  return kPalette[landmark_index % 8];
}

std::vector<Sample> generate_synthetic(int64_t n, int64_t r, int64_t m,
                                       uint64_t seed,
                                       const SynthOptions& opt) {
  if (m < 2)
    throw ConfigError("generate_synthetic: need at least 2 landmarks for the "
                      "normalization pair");
  if (n < 0 || r < 8) throw ConfigError("generate_synthetic: bad n or R");
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(n));
  const double sigma = opt.blob_sigma_frac * static_cast<double>(r);
  for (int64_t id = 0; id < n; ++id) {
    Rng rng = derived_rng(seed, static_cast<uint64_t>(id) + 1);
    std::vector<double> img(static_cast<size_t>(3 * r * r));

    // Textured background: per-channel base tone plus one low-frequency wave.
    for (int64_t ch = 0; ch < 3; ++ch) {
      double base = rng.uniform(0.15, 0.35);
      double amp = rng.uniform(0.03, 0.08);
      double fx = rng.uniform(0.5, 2.0), fy = rng.uniform(0.5, 2.0);
      double phase = rng.uniform(0.0, 2.0 * M_PI);
      for (int64_t y = 0; y < r; ++y)
        for (int64_t x = 0; x < r; ++x)
          img[(ch * r + y) * r + x] =
              base + amp * std::sin(2.0 * M_PI *
                                        (fx * x + fy * y) /
                                        static_cast<double>(r) +
                                    phase);
    }
    if (opt.noise > 0)
      for (double& v : img) v += rng.uniform(-opt.noise, opt.noise);

    // Gray distractor blobs.
    const double gray[3] = {0.45, 0.45, 0.45};
    for (int64_t k = 0; k < opt.distractors; ++k)
      render_blob(img, r, rng.uniform(0.1, 0.9) * r, rng.uniform(0.1, 0.9) * r,
                  sigma * rng.uniform(0.8, 1.6), gray, 0.35);

    // Landmark blobs: canonical layout, global jitter, per-point jitter.
    double gdx = rng.uniform(-0.05, 0.05), gdy = rng.uniform(-0.05, 0.05);
    double gs = rng.uniform(0.9, 1.1);
    std::vector<double> lm(static_cast<size_t>(m * 2));
    for (int64_t i = 0; i < m; ++i) {
      auto [ux, uy] = canonical_position(i, m);
      double x = (0.5 + gs * (ux - 0.5) + gdx + rng.uniform(-0.04, 0.04)) * r;
      double y = (0.5 + gs * (uy - 0.5) + gdy + rng.uniform(-0.04, 0.04)) * r;
      x = std::clamp(x, 3.0 * sigma, r - 1 - 3.0 * sigma);
      y = std::clamp(y, 3.0 * sigma, r - 1 - 3.0 * sigma);
      lm[i * 2 + 0] = x;
      lm[i * 2 + 1] = y;
      render_blob(img, r, x, y, sigma, palette_color(i), 0.85);
    }

    for (double& v : img) v = std::clamp(v, 0.0, 1.0);
    Sample s;
    s.image = Tensor::from_data({3, r, r}, std::move(img));
    s.landmarks = Tensor::from_data({m, 2}, std::move(lm));
    s.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

std::string AugmentRecipe::canonical_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "rotate=" << rotate << " max_deg=" << rotate_max_deg
     << " translate=" << translate << " max_px=" << translate_max_px
     << " flip=" << flip << " swaps=";
  for (auto [a, b] : flip_swap) os << a << ":" << b << ";";
  os << " occlude=" << occlude << " frac=" << occlude_frac
     << " blur=" << blur << " jitter=" << color_jitter
     << " jmax=" << color_jitter_max << " gray=" << grayscale
     << " gprob=" << grayscale_prob;
  return os.str();
}

uint64_t AugmentRecipe::hash() const { return fnv1a(canonical_text()); }

AugmentRecipe AugmentRecipe::none() {
  AugmentRecipe r;
  r.rotate = r.translate = r.flip = r.occlude = r.blur = false;
  r.color_jitter = r.grayscale = false;
  return r;
}

AugmentRecipe AugmentRecipe::standard() {
  AugmentRecipe r;
  r.rotate = r.translate = r.flip = r.occlude = true;
  r.blur = r.color_jitter = r.grayscale = true;
  return r;
}

namespace {

double bilinear(const std::vector<double>& img, int64_t r, int64_t ch,
                double x, double y, double fill) {
  if (x < 0 || y < 0 || x > r - 1 || y > r - 1) return fill;
  int64_t x0 = static_cast<int64_t>(std::floor(x));
  int64_t y0 = static_cast<int64_t>(std::floor(y));
  int64_t x1 = std::min(x0 + 1, r - 1);
  int64_t y1 = std::min(y0 + 1, r - 1);
  double fx = x - x0, fy = y - y0;
  auto px = [&](int64_t yy, int64_t xx) {
    return img[(ch * r + yy) * r + xx];
  };
  return (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x1)) +
         fy * ((1 - fx) * px(y1, x0) + fx * px(y1, x1));
}

}  // namespace

Sample augment(const Sample& s, const AugmentRecipe& recipe, uint64_t seed) {
  Rng rng = derived_rng(seed, static_cast<uint64_t>(s.id) * 2 + 0x617567ull);
  const int64_t r = s.image.size(1);
  const int64_t m = s.landmarks.size(0);
  std::vector<double> img = s.image.data();
  std::vector<double> lm = s.landmarks.data();
  Sample out;
  out.id = s.id;

  // Geometric: rotation about the center composed with translation. Pixels
  // are pulled through the inverse map; landmarks go through the forward map.
  double angle = recipe.rotate
                     ? rng.uniform(-recipe.rotate_max_deg,
                                   recipe.rotate_max_deg) * M_PI / 180.0
                     : 0.0;
  double tx = recipe.translate
                  ? rng.uniform(-recipe.translate_max_px,
                                recipe.translate_max_px)
                  : 0.0;
  double ty = recipe.translate
                  ? rng.uniform(-recipe.translate_max_px,
                                recipe.translate_max_px)
                  : 0.0;
  if (angle != 0.0 || tx != 0.0 || ty != 0.0) {
    double c = std::cos(angle), sn = std::sin(angle);
    double cx = (r - 1) * 0.5, cy = (r - 1) * 0.5;
    std::vector<double> warped(img.size());
    for (int64_t ch = 0; ch < 3; ++ch)
      for (int64_t y = 0; y < r; ++y)
        for (int64_t x = 0; x < r; ++x) {
          // inverse map: un-translate, rotate by -angle
          double ux = x - tx - cx, uy = y - ty - cy;
          double sx = c * ux + sn * uy + cx;
          double sy = -sn * ux + c * uy + cy;
          warped[(ch * r + y) * r + x] = bilinear(img, r, ch, sx, sy, 0.25);
        }
    img = std::move(warped);
    for (int64_t i = 0; i < m; ++i) {
      double ux = lm[i * 2 + 0] - cx, uy = lm[i * 2 + 1] - cy;
      lm[i * 2 + 0] = c * ux - sn * uy + cx + tx;
      lm[i * 2 + 1] = sn * ux + c * uy + cy + ty;
    }
  }

  if (recipe.flip && rng.uniform() < 0.5) {
    std::vector<double> flipped(img.size());
    for (int64_t ch = 0; ch < 3; ++ch)
      for (int64_t y = 0; y < r; ++y)
        for (int64_t x = 0; x < r; ++x)
          flipped[(ch * r + y) * r + x] = img[(ch * r + y) * r + (r - 1 - x)];
    img = std::move(flipped);
    for (int64_t i = 0; i < m; ++i)
      lm[i * 2 + 0] = (r - 1) - lm[i * 2 + 0];
    for (auto [a, b] : recipe.flip_swap) {
      if (a >= m || b >= m) continue;
      std::swap(lm[a * 2 + 0], lm[b * 2 + 0]);
      std::swap(lm[a * 2 + 1], lm[b * 2 + 1]);
    }
  }

  if (recipe.blur && rng.uniform() < 0.5) {
    std::vector<double> blurred(img.size());
    for (int64_t ch = 0; ch < 3; ++ch)
      for (int64_t y = 0; y < r; ++y)
        for (int64_t x = 0; x < r; ++x) {
          double acc = 0.0;
          int cnt = 0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              int64_t yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= r || xx < 0 || xx >= r) continue;
              acc += img[(ch * r + yy) * r + xx];
              ++cnt;
            }
          blurred[(ch * r + y) * r + x] = acc / cnt;
        }
    img = std::move(blurred);
  }

  if (recipe.color_jitter) {
    for (int64_t ch = 0; ch < 3; ++ch) {
      double gain = 1.0 + rng.uniform(-recipe.color_jitter_max,
                                      recipe.color_jitter_max);
      for (int64_t k = 0; k < r * r; ++k)
        img[ch * r * r + k] = std::clamp(img[ch * r * r + k] * gain, 0.0, 1.0);
    }
  }

  if (recipe.grayscale && rng.uniform() < recipe.grayscale_prob) {
    for (int64_t k = 0; k < r * r; ++k) {
      double g = (img[k] + img[r * r + k] + img[2 * r * r + k]) / 3.0;
      img[k] = img[r * r + k] = img[2 * r * r + k] = g;
    }
  }

  if (recipe.occlude && rng.uniform() < 0.5) {
    int64_t ow = std::max<int64_t>(1, static_cast<int64_t>(recipe.occlude_frac * r));
    int64_t x0 = rng.uniform_int(0, r - ow);
    int64_t y0 = rng.uniform_int(0, r - ow);
    for (int64_t ch = 0; ch < 3; ++ch)
      for (int64_t y = y0; y < y0 + ow; ++y)
        for (int64_t x = x0; x < x0 + ow; ++x)
          img[(ch * r + y) * r + x] = 0.0;
  }

  for (int64_t i = 0; i < m; ++i) {
    double cxr = std::clamp(lm[i * 2 + 0], 0.0, static_cast<double>(r - 1));
    double cyr = std::clamp(lm[i * 2 + 1], 0.0, static_cast<double>(r - 1));
    if (cxr != lm[i * 2 + 0] || cyr != lm[i * 2 + 1]) out.clamped = true;
    lm[i * 2 + 0] = cxr;
    lm[i * 2 + 1] = cyr;
  }

  out.image = Tensor::from_data({3, r, r}, std::move(img));
  out.landmarks = Tensor::from_data({m, 2}, std::move(lm));
  return out;
}

void write_ppm(const Tensor& image, const std::string& path) {
  const int64_t r = image.size(1), w = image.size(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_ppm: cannot write " + path);
  out << "P6\n" << w << " " << r << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(w * 3));
  for (int64_t y = 0; y < r; ++y) {
    for (int64_t x = 0; x < w; ++x)
      for (int64_t ch = 0; ch < 3; ++ch) {
        double v = std::clamp(image.at({ch, y, x}), 0.0, 1.0);
        row[x * 3 + ch] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write_ppm: write failed for " + path);
}

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
  std::string magic;
  int64_t w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  if (magic != "P6" || maxv != 255 || w < 1 || h < 1)
    throw std::runtime_error("read_ppm: not an 8-bit P6 file: " + path);
  in.get();  // single whitespace after header
  std::vector<unsigned char> raw(static_cast<size_t>(w * h * 3));
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error("read_ppm: truncated file: " + path);
  std::vector<double> img(raw.size());
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t ch = 0; ch < 3; ++ch)
        img[(ch * h + y) * w + x] = raw[(y * w + x) * 3 + ch] / 255.0;
  return Tensor::from_data({3, h, w}, std::move(img));
}

namespace {

std::string image_name(int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%05lld.ppm",
                static_cast<long long>(id));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

void save_dataset(const std::vector<Sample>& samples, const std::string& dir,
                  const DatasetManifest& manifest) {
  fs::create_directories(dir);
  fs::create_directories(fs::path(dir) / "images");

  std::ostringstream lmcsv;
  lmcsv.precision(17);
  int64_t m = samples.empty() ? manifest.landmarks : samples[0].landmarks.size(0);
  lmcsv << "id";
  for (int64_t i = 1; i <= m; ++i) lmcsv << ",x" << i << ",y" << i;
  lmcsv << "\n";
  for (const auto& s : samples) {
    lmcsv << s.id;
    for (int64_t i = 0; i < m; ++i)
      lmcsv << "," << s.landmarks.at({i, 0}) << "," << s.landmarks.at({i, 1});
    lmcsv << "\n";
    write_ppm(s.image, (fs::path(dir) / "images" / image_name(s.id)).string());
  }
  std::string lmtext = lmcsv.str();
  {
    std::ofstream out(fs::path(dir) / "landmarks.csv");
    out << lmtext;
    if (!out) throw std::runtime_error("save_dataset: cannot write landmarks.csv");
  }
  DatasetManifest man = manifest;
  man.count = static_cast<int64_t>(samples.size());
  man.landmarks = m;
  man.landmarks_checksum = fnv1a(lmtext);
  std::ofstream out(fs::path(dir) / "manifest.txt");
  out << "count=" << man.count << "\n"
      << "resolution=" << man.resolution << "\n"
      << "landmarks=" << man.landmarks << "\n"
      << "seed=" << man.seed << "\n"
      << "split=" << man.split << "\n"
      << "recipe_hash=" << man.recipe_hash << "\n"
      << "landmarks_checksum=" << man.landmarks_checksum << "\n";
  if (!out) throw std::runtime_error("save_dataset: cannot write manifest.txt");
}

std::pair<std::vector<Sample>, DatasetManifest> load_dataset(
    const std::string& dir) {
  fs::path root(dir);
  if (!fs::exists(root / "manifest.txt"))
    throw std::runtime_error("load_dataset: no manifest.txt in " + dir +
                             " (empty or not a dataset directory)");
  DatasetManifest man;
  {
    std::istringstream in(read_file((root / "manifest.txt").string()));
    std::string line;
    while (std::getline(in, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string k = line.substr(0, eq), v = line.substr(eq + 1);
      if (k == "count") man.count = std::stoll(v);
      else if (k == "resolution") man.resolution = std::stoll(v);
      else if (k == "landmarks") man.landmarks = std::stoll(v);
      else if (k == "seed") man.seed = std::stoull(v);
      else if (k == "split") man.split = v;
      else if (k == "recipe_hash") man.recipe_hash = std::stoull(v);
      else if (k == "landmarks_checksum") man.landmarks_checksum = std::stoull(v);
    }
  }
  std::string lmtext = read_file((root / "landmarks.csv").string());
  if (fnv1a(lmtext) != man.landmarks_checksum)
    throw std::runtime_error(
        "load_dataset: landmarks.csv checksum does not match the manifest "
        "(file modified or corrupt) in " + dir);

  std::vector<Sample> samples;
  std::istringstream in(lmtext);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    Sample s;
    s.id = std::stoll(cell);
    std::vector<double> lm;
    while (std::getline(row, cell, ',')) lm.push_back(std::stod(cell));
    if (static_cast<int64_t>(lm.size()) != man.landmarks * 2)
      throw std::runtime_error("load_dataset: malformed landmark row: " + line);
    s.landmarks = Tensor::from_data({man.landmarks, 2}, std::move(lm));
    s.image = read_ppm((root / "images" / image_name(s.id)).string());
    samples.push_back(std::move(s));
  }
  if (static_cast<int64_t>(samples.size()) != man.count)
    throw std::runtime_error("load_dataset: sample count does not match manifest");
  return {std::move(samples), man};
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_by_parity(
    const std::vector<Sample>& samples) {
  std::vector<Sample> train, test;
  for (const auto& s : samples)
    (s.id % 2 == 0 ? train : test).push_back(s);
  return {std::move(train), std::move(test)};
}

}  // namespace dvit
