#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace n2f {

#if defined(N2F_REAL_DOUBLE)
using Real = double;
#else
using Real = float;
#endif

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense rank-4 array in (batch, channel, height, width) row-major order.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(validated(shape)), data_(shape_.size(), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(validated(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  std::size_t index(int b, int ch, int y, int x) const {
    return ((static_cast<std::size_t>(b) * shape_.c + ch) * shape_.h + y) * shape_.w + x;
  }
  T& at(int b, int ch, int y, int x) { return data_[index(b, ch, y, x)]; }
  const T& at(int b, int ch, int y, int x) const { return data_[index(b, ch, y, x)]; }

  // Pointer to the (b, ch) image plane.
  T* plane(int b, int ch) { return data_.data() + index(b, ch, 0, 0); }
  const T* plane(int b, int ch) const { return data_.data() + index(b, ch, 0, 0); }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  // Reallocates only when the element count grows.
  void reshape(Shape shape) {
    shape_ = validated(shape);
    data_.resize(shape_.size());
  }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

 private:
  static Shape validated(Shape s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
      throw ShapeError("tensor dimensions must be >= 1, got " + s.str());
    }
    return s;
  }

  Shape shape_{};
  std::vector<T> data_{};
};

inline std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

}  // namespace n2f
