#include "n2f/loss.hpp"

#include <cmath>

#include "n2f/conv.hpp"

namespace n2f {
namespace {

template <class T>
void check_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + a.shape().str() + " != " + b.shape().str());
  }
}

}  // namespace

template <class T>
LossResult<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& target) {
  check_same(logits, target, "bce_with_logits");
  const std::size_t count = logits.size();
  const T* z = logits.data();
  const T* t = target.data();
  for (std::size_t i = 0; i < count; ++i) {
    if (!(t[i] >= T(0) && t[i] <= T(1))) {
      throw std::invalid_argument("bce_with_logits: target " + std::to_string(double(t[i])) +
                                  " outside [0, 1] at index " + std::to_string(i));
    }
  }

  LossResult<T> result{0.0, Tensor<T>(logits.shape())};
  T* g = result.grad.data();
  const T inv_n = T(1) / static_cast<T>(count);
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double zi = z[i];
    const double ti = t[i];
    sum += std::max(zi, 0.0) - zi * ti + std::log1p(std::exp(-std::abs(zi)));
    g[i] = (sigmoid(z[i]) - t[i]) * inv_n;
  }
  result.loss = sum / static_cast<double>(count);
  return result;
}

template <class T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check_same(pred, target, "mse_loss");
  const std::size_t count = pred.size();
  LossResult<T> result{0.0, Tensor<T>(pred.shape())};
  const T* p = pred.data();
  const T* t = target.data();
  T* g = result.grad.data();
  const T scale = T(2) / static_cast<T>(count);
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const T d = p[i] - t[i];
    sum += static_cast<double>(d) * d;
    g[i] = scale * d;
  }
  result.loss = sum / static_cast<double>(count);
  return result;
}

template <class T>
LossResult<T> mse_with_logits(const Tensor<T>& logits, const Tensor<T>& target) {
  const Tensor<T> prob = sigmoid(logits);
  LossResult<T> result = mse_loss(prob, target);
  T* g = result.grad.data();
  const T* s = prob.data();
  for (std::size_t i = 0; i < result.grad.size(); ++i) g[i] *= s[i] * (T(1) - s[i]);
  return result;
}

template LossResult<float> bce_with_logits(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> bce_with_logits(const Tensor<double>&, const Tensor<double>&);
template LossResult<float> mse_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> mse_loss(const Tensor<double>&, const Tensor<double>&);
template LossResult<float> mse_with_logits(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> mse_with_logits(const Tensor<double>&, const Tensor<double>&);

}  // namespace n2f
