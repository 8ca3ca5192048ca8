#pragma once

#include <cstddef>

namespace n2f::detail {

template <class T>
struct MatrixView {
  const T* data;
  std::ptrdiff_t row_stride;
  std::ptrdiff_t col_stride;

  const T& operator()(std::ptrdiff_t r, std::ptrdiff_t c) const {
    return data[r * row_stride + c * col_stride];
  }
};

// C(m x n, row stride ldc) += A(m x k) * B(k x n).
//
// Every element of C is one fused multiply-add chain over k in ascending
// order, starting from its current value. Blocking, packing and the OpenMP
// split only partition C, so results are independent of the thread count and
// bitwise equal to the naive triple loop written with std::fma.
template <class T>
void gemm_accumulate(int m, int n, int k, MatrixView<T> a, MatrixView<T> b, T* c, std::ptrdiff_t ldc);

// Name of the micro-kernel selected at compile time ("avx512", "avx2", "scalar").
const char* gemm_kernel_name();

}  // namespace n2f::detail
