#pragma once

#include "n2f/tensor.hpp"

namespace n2f {

template <class T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;
};

/// Mean binary cross-entropy of sigmoid(logits) against targets in [0, 1],
/// evaluated in the fused form max(z,0) - z*t + log1p(exp(-|z|)).
/// grad = (sigmoid(z) - t) / N.
template <class T>
LossResult<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& target);

/// Mean squared error; grad = 2 (p - t) / N.
template <class T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// MSE between sigmoid(logits) and target, differentiated back to the logits.
template <class T>
LossResult<T> mse_with_logits(const Tensor<T>& logits, const Tensor<T>& target);

}  // namespace n2f
