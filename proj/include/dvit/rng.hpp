#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dvit {

// Deterministic RNG. Normal draws use Box-Muller directly so streams are
// identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  double uniform() {  // [0,1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive range
    return lo + static_cast<int64_t>(engine_() %
                                     static_cast<uint64_t>(hi - lo + 1));
  }

  double normal(double mu = 0.0, double sigma = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * M_PI * u2);
    return mu + sigma * z;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(engine_() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Stable stream derivation from a base seed plus stream id.
inline Rng derived_rng(uint64_t seed, uint64_t stream_id) {
  uint64_t s = seed ^ (stream_id * 0x9E3779B97F4A7C15ull);
  s ^= s >> 33;
  s *= 0xFF51AFD7ED558CCDull;
  s ^= s >> 33;
  return Rng(s);
}

}  // namespace dvit
