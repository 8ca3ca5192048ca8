#pragma once

#include <vector>

#include "n2f/tensor.hpp"

namespace n2f {

enum class Activation { identity, relu };

/// Stride-1 convolution with symmetric zero padding (pad = (k - 1) / 2),
/// so spatial size is preserved. Kernels are 1x1 or 3x3.
template <class T>
struct ConvLayer {
  Tensor<T> weights;  // (out_ch, in_ch, kh, kw)
  std::vector<T> bias;
  int padding = 0;
  Activation activation = Activation::identity;

  ConvLayer() = default;
  ConvLayer(int in_ch, int out_ch, int kernel, Activation act);

  int out_channels() const { return weights.n(); }
  int in_channels() const { return weights.c(); }
  int kernel_h() const { return weights.h(); }
  int kernel_w() const { return weights.w(); }
  std::size_t parameter_count() const { return weights.size() + bias.size(); }

  // Throws ShapeError unless the invariants hold.
  void check() const;
};

template <class T>
struct ConvGrads {
  Tensor<T> input;  // empty when not requested
  Tensor<T> weights;
  std::vector<T> bias;
};

/// out[b,o,y,x] = act(bias[o] + sum_{i,dy,dx} in_pad[b,i,y+dy,x+dx] * w[o,i,dy,dx]),
/// accumulated in (i, dy, dx) order with one fused multiply-add per term.
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer);

/// Same as conv2d_forward but writes into `out`, reusing its storage.
template <class T>
void conv2d_forward_into(const Tensor<T>& input, const ConvLayer<T>& layer, Tensor<T>& out);

/// Gradients of a scalar loss given dL/d(output). `saved_output` is the
/// forward result; for ReLU layers it supplies the activation mask
/// (output > 0 exactly where the pre-activation is > 0).
template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input,
                             const Tensor<T>& saved_output, const ConvLayer<T>& layer,
                             bool want_input_grad = true);

template <class T>
Tensor<T> relu(const Tensor<T>& x);

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <class T>
T sigmoid(T z);

}  // namespace n2f
