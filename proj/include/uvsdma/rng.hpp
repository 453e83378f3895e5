#pragma once

#include <array>
#include <cstdint>

namespace uvsdma {

/// Counter-based pseudo-random generator (Philox 4x64, 10 rounds).
///
/// Every draw is a pure function of (seed, stream, position), so any
/// (trial, symbol, purpose) in a simulation can be given its own stream and
/// produce the same values no matter how work is scheduled across threads.
/// Each generated block yields four 64-bit words; the generator advances the
/// block counter as words are consumed.
class CounterRng {
 public:
  /// One 256-bit block for block index `c0` of stream `c2` under `key`.
  /// Exposed so known-answer tests can address blocks directly.
  static std::array<std::uint64_t, 4> block(const std::array<std::uint64_t, 4>& counter,
                                            const std::array<std::uint64_t, 2>& key);

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_{seed, 0}, stream_(stream), next_block_(0), index_(4) {}

  /// Uniform 64-bit word.
  std::uint64_t next_u64() {
    if (index_ == 4) {
      buffer_ = block({next_block_, 0, stream_, 0}, key_);
      ++next_block_;
      index_ = 0;
    }
    return buffer_[index_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in the open interval (0, 1); safe to pass to log().
  double next_double_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n) by rejection; n must be positive.
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::array<std::uint64_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t next_block_;
  std::array<std::uint64_t, 4> buffer_{};
  int index_;
};

/// Poisson draw with the given mean (mean >= 0, finite).
///
/// Sequential-search inversion below mean 30, transformed rejection above.
/// A zero mean returns zero without consuming generator state.
std::int64_t sample_poisson(double mean, CounterRng& rng);

}  // namespace uvsdma
