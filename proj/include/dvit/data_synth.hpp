#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dvit/rng.hpp"
#include "dvit/tensor.hpp"

namespace dvit {

struct Sample {
  Tensor image;      // (3, R, R), values in [0,1]
  Tensor landmarks;  // (M, 2) image-pixel coordinates
  int64_t id = 0;
  bool clamped = false;  // landmarks pushed back in bounds by augmentation
};

struct AugmentRecipe {
  bool rotate = false;
  double rotate_max_deg = 20.0;
  bool translate = false;
  double translate_max_px = 4.0;
  bool flip = false;
  std::vector<std::pair<int64_t, int64_t>> flip_swap = {{0, 1}, {3, 4}};
  bool occlude = false;
  double occlude_frac = 0.25;
  bool blur = false;
  bool color_jitter = false;
  double color_jitter_max = 0.2;
  bool grayscale = false;
  double grayscale_prob = 0.1;

  std::string canonical_text() const;
  uint64_t hash() const;
  static AugmentRecipe none();
  static AugmentRecipe standard();
};

struct SynthOptions {
  double noise = 0.01;
  int64_t distractors = 3;
  double blob_sigma_frac = 0.04;  // blob sigma as a fraction of R
};

struct DatasetManifest {
  int64_t count = 0, resolution = 0, landmarks = 0;
  uint64_t seed = 0;
  std::string split = "all";
  uint64_t recipe_hash = 0;
  uint64_t landmarks_checksum = 0;
};

// Deterministic blob-scene generator; landmark i is the center of the
// blob drawn in palette color i.
std::vector<Sample> generate_synthetic(int64_t n, int64_t r, int64_t m,
                                       uint64_t seed,
                                       const SynthOptions& opt = {});

const double* palette_color(int64_t landmark_index);  // 3 values, unit norm

Sample augment(const Sample& s, const AugmentRecipe& recipe, uint64_t seed);

void save_dataset(const std::vector<Sample>& samples, const std::string& dir,
                  const DatasetManifest& manifest);
std::pair<std::vector<Sample>, DatasetManifest> load_dataset(
    const std::string& dir);

// Train/test split by id parity: even ids train, odd ids test.
std::pair<std::vector<Sample>, std::vector<Sample>> split_by_parity(
    const std::vector<Sample>& samples);

void write_ppm(const Tensor& image, const std::string& path);
Tensor read_ppm(const std::string& path);

}  // namespace dvit
