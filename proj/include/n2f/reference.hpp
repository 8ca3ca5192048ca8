#pragma once

// Serial reference kernels. They are the plain nested loops the optimized
// convolution must reproduce: same accumulation order, same fused
// multiply-adds, so in 64-bit mode the two agree bit for bit.

#include <cmath>

#include "n2f/conv.hpp"

namespace n2f::reference {

template <class T>
T padded(const Tensor<T>& t, int b, int ch, int y, int x) {
  if (y < 0 || y >= t.h() || x < 0 || x >= t.w()) return T(0);
  return t.at(b, ch, y, x);
}

template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer) {
  layer.check();
  if (input.c() != layer.in_channels()) throw ShapeError("reference conv2d: channel mismatch");
  const int kh = layer.kernel_h();
  const int kw = layer.kernel_w();
  const int pad = layer.padding;
  Tensor<T> out(Shape{input.n(), layer.out_channels(), input.h(), input.w()});
  for (int b = 0; b < input.n(); ++b)
    for (int o = 0; o < layer.out_channels(); ++o)
      for (int y = 0; y < input.h(); ++y)
        for (int x = 0; x < input.w(); ++x) {
          T acc = layer.bias[o];
          for (int i = 0; i < layer.in_channels(); ++i)
            for (int dy = 0; dy < kh; ++dy)
              for (int dx = 0; dx < kw; ++dx)
                acc = std::fma(layer.weights.at(o, i, dy, dx), padded(input, b, i, y + dy - pad, x + dx - pad), acc);
          if (layer.activation == Activation::relu) acc = acc > T(0) ? acc : T(0);
          out.at(b, o, y, x) = acc;
        }
  return out;
}

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input,
                             const Tensor<T>& saved_output, const ConvLayer<T>& layer) {
  layer.check();
  const int n = saved_input.n();
  const int h = saved_input.h();
  const int w = saved_input.w();
  const int ic = layer.in_channels();
  const int oc = layer.out_channels();
  const int kh = layer.kernel_h();
  const int kw = layer.kernel_w();
  const int pad = layer.padding;
  if (grad_out.shape() != Shape{n, oc, h, w}) throw ShapeError("reference conv2d_backward: grad shape");

  Tensor<T> g = grad_out;
  if (layer.activation == Activation::relu)
    for (std::size_t k = 0; k < g.size(); ++k)
      if (!(saved_output.data()[k] > T(0))) g.data()[k] = T(0);

  ConvGrads<T> out;
  out.bias.assign(oc, T(0));
  for (int o = 0; o < oc; ++o) {
    T acc = 0;
    for (int b = 0; b < n; ++b)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) acc += g.at(b, o, y, x);
    out.bias[o] = acc;
  }

  out.weights = Tensor<T>(layer.weights.shape());
  for (int o = 0; o < oc; ++o)
    for (int i = 0; i < ic; ++i)
      for (int dy = 0; dy < kh; ++dy)
        for (int dx = 0; dx < kw; ++dx) {
          T acc = 0;
          for (int b = 0; b < n; ++b)
            for (int y = 0; y < h; ++y)
              for (int x = 0; x < w; ++x)
                acc = std::fma(g.at(b, o, y, x), padded(saved_input, b, i, y + dy - pad, x + dx - pad), acc);
          out.weights.at(o, i, dy, dx) = acc;
        }

  // grad_in[i, y, x] = sum_{o, ky, kx} g[o, y + ky - pad', x + kx - pad'] * w[o, i, kh-1-ky, kw-1-kx]
  const int tpad = kh - 1 - pad;
  out.input = Tensor<T>(saved_input.shape());
  for (int b = 0; b < n; ++b)
    for (int i = 0; i < ic; ++i)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          T acc = 0;
          for (int o = 0; o < oc; ++o)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx)
                acc = std::fma(layer.weights.at(o, i, kh - 1 - ky, kw - 1 - kx),
                               padded(g, b, o, y + ky - tpad, x + kx - tpad), acc);
          out.input.at(b, i, y, x) = acc;
        }
  return out;
}

}  // namespace n2f::reference
