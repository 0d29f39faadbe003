#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace zslgmm {

/// Counter-based 64-bit pseudorandom generator, version "ctr64-v1".
///
/// Draw i (i = 1, 2, ...) from a stream with key k is
///
///     mix64(k + i * 0x9E3779B97F4A7C15)
///
/// where mix64 is the SplitMix64 finalizer:
///
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     z =  z ^ (z >> 31)
///
/// A generator seeded with s has key mix64(s). Named substreams use key
/// mix64(k ^ fnv1a64(name)); indexed substreams use mix64(k ^ mix64(index + 0x9E3779B97F4A7C15)).
/// Everything here is integer arithmetic except `normal`, which is Box-Muller over `uniform`.
class CounterRng {
public:
  using result_type = std::uint64_t;

  static constexpr std::string_view kVersion = "ctr64-v1";
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed)) {}

  CounterRng substream(std::string_view name) const noexcept;
  CounterRng substream(std::uint64_t index) const noexcept;

  std::uint64_t next_u64() noexcept;
  result_type operator()() noexcept { return next_u64(); }
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform integer in [0, n); n must be positive. Unbiased (rejection).
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  /// Standard normal variate.
  double normal() noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static std::uint64_t mix64(std::uint64_t z) noexcept;
  static std::uint64_t fnv1a64(std::string_view text) noexcept;

private:
  struct FromKey {};
  CounterRng(FromKey, std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace zslgmm
