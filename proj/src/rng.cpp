#include "n2f/rng.hpp"

#include <cmath>
#include <numbers>

namespace n2f {
namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const unsigned __int128 product = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(product >> 64);
  lo = static_cast<std::uint64_t>(product);
}

}  // namespace

Philox::Block Philox::generate(Block ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

double Philox::normal(std::uint64_t index) const {
  const Block bits = block(index / 4);
  const unsigned lane = static_cast<unsigned>(index % 4);
  const unsigned pair = lane / 2;
  const double radius = std::sqrt(-2.0 * std::log(to_unit_open_low(bits[2 * pair])));
  const double angle = 2.0 * std::numbers::pi * to_unit(bits[2 * pair + 1]);
  return (lane % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
}

double Philox::uniform(std::uint64_t index) const { return to_unit(block(index / 4)[index % 4]); }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return Philox::generate({a, b, 0x6e32665f73656564ULL, 0}, {seed, 0x5eed5eed5eed5eedULL})[0];
}

}  // namespace n2f
