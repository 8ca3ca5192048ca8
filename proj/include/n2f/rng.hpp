#pragma once

#include <array>
#include <cstdint>

namespace n2f {

/// Philox4x64-10 counter-based generator (Salmon et al., Random123).
/// Output depends only on (key, counter), so any sample of any stream can be
/// produced independently of evaluation order or thread layout.
class Philox {
 public:
  using Block = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static Block generate(Block counter, Key key);

  /// Stream keyed by (seed, stream id); `block(i)` is the i-th output block.
  Philox(std::uint64_t seed, std::uint64_t stream) : key_{seed, stream} {}

  Block block(std::uint64_t index) const { return generate({index, 0, 0, 0}, key_); }

  /// Uniform double in [0, 1) built from the top 53 bits of `bits`.
  static double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  static double to_unit_open_low(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal variate number `index` of this stream (Box-Muller;
  /// each block yields four variates).
  double normal(std::uint64_t index) const;

  /// Uniform variate number `index` in [0, 1) (four per block).
  double uniform(std::uint64_t index) const;

 private:
  Key key_;
};

/// Derives an independent 64-bit seed for a sub-task (e.g. one channel of one slice).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace n2f
