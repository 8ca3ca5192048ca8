#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace n2f {

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for one parameter tensor.
template <class T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t t = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(std::size_t size, AdamHyper h = {}) : m(size, T(0)), v(size, T(0)), hyper(h) {}
};

/// One bias-corrected Adam update of `param` in place.
template <class T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamState<T>& state);

}  // namespace n2f
