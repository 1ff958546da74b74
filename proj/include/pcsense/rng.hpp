#pragma once

#include <cstdint>
#include <limits>

namespace pcsense {

/// Counter-based generator: the i-th output is the SplitMix64 finalizer
/// applied to key + (i + 1) * golden_gamma. A stream is identified by a key
/// derived from (master seed, stream ids), so any replication's draws can be
/// reproduced without touching the others.
class Substream {
 public:
  using result_type = std::uint64_t;

  explicit Substream(std::uint64_t key) : key_(key) {}

  /// Stream keyed by (seed, a, b).
  static Substream keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t k = mix(seed ^ 0x243f6a8885a308d3ULL);
    k = mix(k ^ (a + 0x13198a2e03707344ULL));
    k = mix(k ^ (b + 0xa4093822299f31d0ULL));
    return Substream(k);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    ++counter_;
    return mix(key_ + counter_ * kGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer on [lo, hi] (inclusive), rejection-free of modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>((*this)());
    const std::uint64_t limit = max() - max() % span;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace pcsense
