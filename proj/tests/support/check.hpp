#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "n2f/conv.hpp"
#include "n2f/plane.hpp"
#include "n2f/rng.hpp"

namespace n2f::testing {

// Deterministic uniform values in [lo, hi) from a Philox stream.
template <class T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Philox rng(seed, 0x7e57);
  Tensor<T> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(lo + (hi - lo) * rng.uniform(i));
  return t;
}

inline Plane random_plane(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Philox rng(seed, 0x9a1e);
  Plane p(h, w);
  for (std::size_t i = 0; i < p.size(); ++i) p.pixels[i] = static_cast<Real>(lo + (hi - lo) * rng.uniform(i));
  return p;
}

template <class T>
ConvLayer<T> random_layer(int in_ch, int out_ch, int kernel, Activation act, std::uint64_t seed) {
  ConvLayer<T> layer(in_ch, out_ch, kernel, act);
  layer.weights = random_tensor<T>(layer.weights.shape(), seed, -0.5, 0.5);
  Philox rng(seed, 0xb1a5);
  for (int o = 0; o < out_ch; ++o) layer.bias[o] = static_cast<T>(0.2 * rng.uniform(o) - 0.1);
  return layer;
}

// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero pairs from
// turning rounding noise into huge ratios.
inline double rel_error(double a, double b, double floor = 1e-30) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

template <class T>
double max_rel_error(const std::vector<T>& a, const std::vector<T>& b, double floor = 1e-30) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_error(a[i], b[i], floor));
  return worst;
}

template <class T>
bool bitwise_equal(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

}  // namespace n2f::testing
