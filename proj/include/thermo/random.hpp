#pragma once

#include <cstdint>
#include <random>

namespace thermo {

/// SplitMix64 finaliser; used both as a hash and to derive per-task streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the task-th independent stream derived from a run seed.
/// The rule (seed, task) -> splitmix64(splitmix64(seed) ^ splitmix64(task + 1))
/// is part of the reproducibility contract of every sampler.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t task) {
  return splitmix64(splitmix64(seed) ^ splitmix64(task + 1));
}

// mt19937_64 is fully specified by the standard, but the std distributions are
// not, so uniform variates are built from raw bits here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u = 0.0;
    while (u == 0.0) u = uniform();
    return u;
  }

  std::uint64_t bits() { return engine_(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace thermo
