#include "n2f/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace n2f {

template <class T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamState<T>& state) {
  if (param.size() != grad.size() || param.size() != state.m.size() || param.size() != state.v.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state sizes differ");
  }
  const AdamHyper& hp = state.hyper;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const T b1 = static_cast<T>(hp.beta1);
  const T b2 = static_cast<T>(hp.beta2);
  const T c1 = static_cast<T>(1.0 - hp.beta1);
  const T c2 = static_cast<T>(1.0 - hp.beta2);
  const T inv_bc1 = static_cast<T>(1.0 / (1.0 - std::pow(hp.beta1, t)));
  const T inv_bc2 = static_cast<T>(1.0 / (1.0 - std::pow(hp.beta2, t)));
  const T lr = static_cast<T>(hp.lr);
  const T eps = static_cast<T>(hp.eps);

  T* p = param.data();
  const T* g = grad.data();
  T* m = state.m.data();
  T* v = state.v.data();
  const std::size_t count = param.size();
#pragma omp simd
  for (std::size_t i = 0; i < count; ++i) {
    m[i] = b1 * m[i] + c1 * g[i];
    v[i] = b2 * v[i] + c2 * (g[i] * g[i]);
    const T m_hat = m[i] * inv_bc1;
    const T v_hat = v[i] * inv_bc2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamState<float>&);
template void adam_step<double>(std::span<double>, std::span<const double>, AdamState<double>&);

}  // namespace n2f
