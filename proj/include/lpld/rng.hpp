#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace lpld {

// Deterministic random stream. All sampling goes through hand-rolled
// transforms on top of mt19937_64 so that two runs with the same seed
// produce identical values regardless of the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Mixes extra stream identifiers into a seed. Used to derive independent
  // per-scene / per-epoch streams so generation order does not matter.
  static uint64_t mix(uint64_t seed, uint64_t a, uint64_t b = 0) {
    uint64_t h = seed;
    h ^= (a + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    h *= 0xff51afd7ed558ccdULL;
    h ^= (b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    h *= 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    return h;
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t uniform_int(uint64_t n) {
    return static_cast<uint64_t>(next_double() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 1e-300) u1 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace lpld
