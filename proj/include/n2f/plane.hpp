#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "n2f/tensor.hpp"

namespace n2f {

/// Single-channel 2-D image, row-major.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<Real> pixels;

  Plane() = default;
  Plane(int h, int w, Real fill = Real(0)) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {
    if (h < 1 || w < 1) throw ShapeError("plane dimensions must be >= 1");
  }
  Plane(int h, int w, std::vector<Real> data) : height(h), width(w), pixels(std::move(data)) {
    if (h < 1 || w < 1 || pixels.size() != static_cast<std::size_t>(h) * w) {
      throw ShapeError("plane data does not match " + std::to_string(h) + "x" + std::to_string(w));
    }
  }

  Real& operator()(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  Real operator()(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return pixels.size(); }
  bool same_shape(const Plane& o) const { return height == o.height && width == o.width; }
  bool operator==(const Plane&) const = default;

  Tensor<Real> as_tensor() const { return Tensor<Real>(Shape{1, 1, height, width}, pixels); }
  static Plane from_tensor(const Tensor<Real>& t) {
    if (t.n() != 1 || t.c() != 1) throw ShapeError("plane from tensor needs a 1x1xHxW tensor, got " + t.shape().str());
    return Plane(t.h(), t.w(), t.storage());
  }
};

}  // namespace n2f
