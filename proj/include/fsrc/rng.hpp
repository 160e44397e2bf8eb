#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace fsrc {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seeded generator with portable draws.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Bounded integers and reals are derived here rather than through
/// <random> distributions, which differ between standard libraries.
///
/// Streams: Rng(seed, stream) seeds the engine with
/// mix64(mix64(seed) ^ mix64(stream + 0x9e3779b97f4a7c15)). Episode j of
/// replica i uses Rng(base_seed + i, j).
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform_real();

  /// Uniform real in [lo, hi).
  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

  /// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
  double normal();

  /// `count` distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

 private:
  std::mt19937_64 engine_;
};

}  // namespace fsrc
