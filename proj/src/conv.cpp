#include "n2f/conv.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gemm.hpp"

namespace n2f {
namespace {

using detail::MatrixView;

// Unrolls a (channels, h, w) block into rows indexed by (ch, dy, dx) and
// columns indexed by (y, x); taps that fall in the zero padding are 0.
template <class T>
void im2col(const T* src, int channels, int h, int w, int kh, int kw, int pad, T* col) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < channels; ++ch) {
    const T* img = src + ch * plane;
    for (int dy = 0; dy < kh; ++dy) {
      for (int dx = 0; dx < kw; ++dx) {
        T* row = col + ((static_cast<std::size_t>(ch) * kh + dy) * kw + dx) * plane;
        const int shift = dx - pad;
        const int x_lo = std::clamp(-shift, 0, w);
        const int x_hi = std::clamp(w - shift, 0, w);
        for (int y = 0; y < h; ++y) {
          T* dst = row + static_cast<std::size_t>(y) * w;
          const int sy = y + dy - pad;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, T(0));
            continue;
          }
          std::fill(dst, dst + x_lo, T(0));
          if (x_hi > x_lo) std::memcpy(dst + x_lo, img + static_cast<std::size_t>(sy) * w + x_lo + shift, sizeof(T) * (x_hi - x_lo));
          std::fill(dst + std::max(x_hi, x_lo), dst + w, T(0));
        }
      }
    }
  }
}

template <class T>
std::vector<T>& col_workspace() {
  thread_local std::vector<T> buffer;
  return buffer;
}

// Lays out one batch item's column matrix and returns a view of it.
// 1x1 kernels read the input planes directly.
template <class T>
MatrixView<T> column_view(const T* src, int channels, int h, int w, int kh, int kw, int pad) {
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  if (kh == 1 && kw == 1 && pad == 0) return {src, plane, 1};
  auto& col = col_workspace<T>();
  col.resize(static_cast<std::size_t>(channels) * kh * kw * plane);
  im2col(src, channels, h, w, kh, kw, pad, col.data());
  return {col.data(), plane, 1};
}

template <class T>
void check_input(const Tensor<T>& input, const ConvLayer<T>& layer) {
  layer.check();
  if (input.c() != layer.in_channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(input.c()) + " channels, layer expects " +
                     std::to_string(layer.in_channels()) + " (input shape " + input.shape().str() + ")");
  }
}

}  // namespace

template <class T>
ConvLayer<T>::ConvLayer(int in_ch, int out_ch, int kernel, Activation act)
    : weights(Shape{out_ch, in_ch, kernel, kernel}),
      bias(static_cast<std::size_t>(out_ch), T(0)),
      padding((kernel - 1) / 2),
      activation(act) {
  check();
}

template <class T>
void ConvLayer<T>::check() const {
  const int kh = kernel_h();
  const int kw = kernel_w();
  if ((kh != 1 && kh != 3) || (kw != 1 && kw != 3)) {
    throw ShapeError("conv layer kernel must be 1x1 or 3x3, got " + weights.shape().str());
  }
  if (kh != kw || padding != (kh - 1) / 2) {
    throw ShapeError("conv layer padding must be (k - 1) / 2 for a square kernel");
  }
  if (bias.size() != static_cast<std::size_t>(out_channels())) {
    throw ShapeError("conv layer bias length " + std::to_string(bias.size()) + " != out channels " +
                     std::to_string(out_channels()));
  }
}

template <class T>
void conv2d_forward_into(const Tensor<T>& input, const ConvLayer<T>& layer, Tensor<T>& out) {
  check_input(input, layer);
  const int n = input.n();
  const int h = input.h();
  const int w = input.w();
  const int oc = layer.out_channels();
  const int kk = layer.in_channels() * layer.kernel_h() * layer.kernel_w();
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  out.reshape(Shape{n, oc, h, w});

  const MatrixView<T> wv{layer.weights.data(), kk, 1};
  for (int b = 0; b < n; ++b) {
    T* dst = out.plane(b, 0);
    for (int o = 0; o < oc; ++o) std::fill(dst + o * plane, dst + (o + 1) * plane, layer.bias[o]);
    const auto col = column_view(input.plane(b, 0), input.c(), h, w, layer.kernel_h(), layer.kernel_w(),
                                 layer.padding);
    detail::gemm_accumulate<T>(oc, static_cast<int>(plane), kk, wv, col, dst, plane);
  }
  if (layer.activation == Activation::relu) {
    for (T& v : out.span()) v = v > T(0) ? v : T(0);
  }
}

template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer) {
  Tensor<T> out;
  conv2d_forward_into(input, layer, out);
  return out;
}

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input,
                             const Tensor<T>& saved_output, const ConvLayer<T>& layer, bool want_input_grad) {
  check_input(saved_input, layer);
  const Shape expected{saved_input.n(), layer.out_channels(), saved_input.h(), saved_input.w()};
  if (grad_out.shape() != expected) {
    throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape().str() + " != expected " +
                     expected.str());
  }
  if (layer.activation == Activation::relu && saved_output.shape() != expected) {
    throw ShapeError("conv2d_backward: saved output shape " + saved_output.shape().str() + " != expected " +
                     expected.str());
  }

  const int n = saved_input.n();
  const int h = saved_input.h();
  const int w = saved_input.w();
  const int ic = layer.in_channels();
  const int oc = layer.out_channels();
  const int kh = layer.kernel_h();
  const int kw = layer.kernel_w();
  const int kk = ic * kh * kw;
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;

  Tensor<T> grad_pre = grad_out;
  if (layer.activation == Activation::relu) {
    const T* mask = saved_output.data();
    T* g = grad_pre.data();
    for (std::size_t i = 0; i < grad_pre.size(); ++i) g[i] = mask[i] > T(0) ? g[i] : T(0);
  }

  ConvGrads<T> grads;
  grads.bias.assign(static_cast<std::size_t>(oc), T(0));
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < oc; ++o) {
      const T* g = grad_pre.plane(b, o);
      T acc = grads.bias[o];
      for (std::ptrdiff_t p = 0; p < plane; ++p) acc += g[p];
      grads.bias[o] = acc;
    }
  }

  // dW (oc x kk) += G (oc x P) * col(input)^T (P x kk)
  grads.weights = Tensor<T>(layer.weights.shape());
  for (int b = 0; b < n; ++b) {
    const auto col = column_view(saved_input.plane(b, 0), ic, h, w, kh, kw, layer.padding);
    const MatrixView<T> gv{grad_pre.plane(b, 0), plane, 1};
    const MatrixView<T> colt{col.data, col.col_stride, col.row_stride};
    detail::gemm_accumulate<T>(oc, kk, static_cast<int>(plane), gv, colt, grads.weights.data(), kk);
  }

  if (want_input_grad) {
    // dX is a forward correlation of G with the spatially flipped, channel-
    // transposed kernel: flipped[i, (o, ky, kx)] = w[o, i, kh-1-ky, kw-1-kx].
    const int kt = oc * kh * kw;
    std::vector<T> flipped(static_cast<std::size_t>(ic) * kt);
    for (int o = 0; o < oc; ++o)
      for (int i = 0; i < ic; ++i)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx)
            flipped[static_cast<std::size_t>(i) * kt + (o * kh + ky) * kw + kx] =
                layer.weights.at(o, i, kh - 1 - ky, kw - 1 - kx);
    const MatrixView<T> fv{flipped.data(), kt, 1};
    grads.input = Tensor<T>(saved_input.shape());
    for (int b = 0; b < n; ++b) {
      const auto col = column_view(grad_pre.plane(b, 0), oc, h, w, kh, kw, kh - 1 - layer.padding);
      detail::gemm_accumulate<T>(ic, static_cast<int>(plane), kt, fv, col, grads.input.plane(b, 0), plane);
    }
  }
  return grads;
}

template <class T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (T& v : out.span()) v = v > T(0) ? v : T(0);
  return out;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (T& v : out.span()) v = sigmoid(v);
  return out;
}

#define N2F_INSTANTIATE_CONV(T)                                                                         \
  template struct ConvLayer<T>;                                                                         \
  template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const ConvLayer<T>&);                          \
  template void conv2d_forward_into<T>(const Tensor<T>&, const ConvLayer<T>&, Tensor<T>&);              \
  template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                           const ConvLayer<T>&, bool);                                  \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                         \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                                      \
  template T sigmoid<T>(T);

N2F_INSTANTIATE_CONV(float)
N2F_INSTANTIATE_CONV(double)

}  // namespace n2f
