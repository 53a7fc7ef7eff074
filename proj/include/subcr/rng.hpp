#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace subcr {

/// Counter-based 64-bit generator.
///
/// A stream is identified by a key (seed, round, target). The n-th output of a
/// stream is `mix(key_state + (n + 1) * kGolden)` where `mix` is the
/// SplitMix64 finalizer and `key_state` is obtained by folding the key words
/// through the same finalizer:
///
///   key_state = mix(mix(mix(seed) ^ round) ^ target)
///
/// Uniform doubles take the top 53 bits; bounded integers reject the
/// biased tail before reducing modulo n, so the output is identical on every
/// platform and independent of the standard library's distributions.
class Rng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t seed) : state_(mix(seed)) {}

  static Rng keyed(std::uint64_t seed, std::uint64_t round, std::uint64_t target) {
    Rng r(0);
    r.state_ = mix(mix(mix(seed) ^ round) ^ target);
    return r;
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() {
    state_ += kGolden;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    // Largest multiple of n representable; reject the tail to stay unbiased.
    const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace subcr
