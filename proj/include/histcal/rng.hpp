#pragma once

#include <cstdint>
#include <random>

namespace histcal {

/// Seeded 64-bit Mersenne Twister with a few draw helpers.
///
/// Identical seeds give identical draw sequences. Independent streams for
/// parallel trials come from `derive`, which hashes (seed, stream) so that
/// trial `k` sees the same numbers regardless of scheduling.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t index(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
  }

  double gamma(double shape) {
    return std::gamma_distribution<double>(shape, 1.0)(engine_);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  std::mt19937_64& engine() noexcept { return engine_; }

  static std::uint64_t mix(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static SeededRng derive(std::uint64_t seed, std::uint64_t stream) {
    return SeededRng(mix(seed ^ mix(stream)));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace histcal
