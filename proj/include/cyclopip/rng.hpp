#pragma once

#include <cstdint>
#include <random>

namespace cyclopip {

/**
 * Deterministic seeded PRNG with cheap substream derivation. A fixed seed and
 * stream id reproduce the same draw sequence on every platform (mt19937_64
 * semantics are specified by the standard).
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : eng_(mix(seed, stream)) {}

  /** Derives an independent deterministic substream. */
  Rng split(std::uint64_t stream) {
    return Rng(eng_(), stream * 0x9e3779b97f4a7c15ULL + 1);
  }

  std::uint64_t u64() { return eng_(); }

  /** Uniform integer in [lo, hi], inclusive. */
  long uniform_int(long lo, long hi) {
    std::uniform_int_distribution<long> d(lo, hi);
    return d(eng_);
  }

  double uniform01() {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(eng_);
  }

  double gaussian(double sigma) {
    std::normal_distribution<double> d(0.0, sigma);
    return d(eng_);
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  std::mt19937_64 eng_;
};

}  // namespace cyclopip
