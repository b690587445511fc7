#pragma once

#include <cstdint>
#include <vector>

namespace mvr {

/// Counter-based pseudo-random stream.
///
/// Each draw is the SplitMix64 finalizer applied to (key + counter), so the
/// sequence is a pure function of (seed, stream, counter). Identical seeds
/// reproduce identical integer draws on every platform; doubles derived from
/// them are exact IEEE-754 operations. Gaussian draws use Box-Muller and
/// inherit the libm rounding of log/cos, which is stable across runs on a
/// given platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53 random bits.
  double next_double();

  /// Standard normal via Box-Muller; consumes two draws per call.
  double next_gaussian();

  /// Uniform in [0, n). Unbiased (rejection sampling); n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent stream derived from this stream's key; does not advance
  /// this stream's counter.
  RngStream substream(std::uint64_t id) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mvr
