#pragma once

#include <cstdint>
#include <random>

#include "hexsense/common.hpp"

namespace hexsense {

/// splitmix64 output mixer (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Seed of sub-stream `index` of a run seeded with `base` (per-trial seeds).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base + index * 0x9e3779b97f4a7c15ull);
}

/// Seeded standard-normal stream: mt19937_64 engine + Box-Muller transform on
/// 53-bit uniforms. Both pieces are pinned algorithms, so a (seed, draw count)
/// pair yields the same sequence on every platform and standard library.
/// std::normal_distribution is implementation-defined and deliberately unused.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on (0, 1].
  double uniform01() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal; draws engine values in pairs, caching the second deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hexsense
