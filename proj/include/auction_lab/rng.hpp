#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace auction_lab {

/// A deterministic random stream identified by (seed, stream index).
///
/// Draws are reproducible across platforms: the engine is mt19937_64 seeded
/// through std::seed_seq (both fully specified by the standard) and uniforms
/// are built from the top 53 bits by hand instead of going through
/// std::uniform_real_distribution, whose algorithm is implementation-defined.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_index),
                      static_cast<std::uint32_t>(stream_index >> 32), 0x6175u};
    engine_.seed(seq);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a sub-index into a seed so that nested work (e.g. one stream family per
/// index profile) never reuses another family's streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace auction_lab
