#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace biascert {

/// Seedable, splittable random stream (splitmix64).
///
/// One root stream is created from a 64-bit seed; independent substreams are
/// derived by index so that sample i of a certification run depends only on
/// (seed, i). Substream derivation does not advance the parent stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ kGamma)) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform double in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi].
  double next_in(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  /// Uniform integer in [0, bound), rejection-sampled to avoid modulo bias.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::next_below: bound must be positive");
    const std::uint64_t threshold = -bound % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  bool bernoulli(double p) { return next_unit() < p; }

  /// Independent stream derived from (this stream's seed, index).
  Rng substream(std::uint64_t index) const {
    Rng child(0);
    child.state_ = mix(state_ ^ mix(index + kGamma));
    return child;
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
};

}  // namespace biascert
