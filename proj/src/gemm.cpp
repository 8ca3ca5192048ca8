#include "gemm.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>

#if defined(__AVX512F__) || (defined(__AVX2__) && defined(__FMA__))
#include <immintrin.h>
#endif

namespace n2f::detail {
namespace {

template <class T>
struct Kernel;

#if defined(__AVX512F__)
constexpr const char* kKernelName = "avx512";

template <>
struct Kernel<float> {
  using vec = __m512;
  static constexpr int lanes = 16;
  static constexpr int mr = 8;
  static constexpr int nv = 3;
  static vec load(const float* p) { return _mm512_loadu_ps(p); }
  static void store(float* p, vec v) { _mm512_storeu_ps(p, v); }
  static vec broadcast(float x) { return _mm512_set1_ps(x); }
  static vec fma(vec a, vec b, vec c) { return _mm512_fmadd_ps(a, b, c); }
};

template <>
struct Kernel<double> {
  using vec = __m512d;
  static constexpr int lanes = 8;
  static constexpr int mr = 8;
  static constexpr int nv = 3;
  static vec load(const double* p) { return _mm512_loadu_pd(p); }
  static void store(double* p, vec v) { _mm512_storeu_pd(p, v); }
  static vec broadcast(double x) { return _mm512_set1_pd(x); }
  static vec fma(vec a, vec b, vec c) { return _mm512_fmadd_pd(a, b, c); }
};

#elif defined(__AVX2__) && defined(__FMA__)
constexpr const char* kKernelName = "avx2";

template <>
struct Kernel<float> {
  using vec = __m256;
  static constexpr int lanes = 8;
  static constexpr int mr = 4;
  static constexpr int nv = 3;
  static vec load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, vec v) { _mm256_storeu_ps(p, v); }
  static vec broadcast(float x) { return _mm256_set1_ps(x); }
  static vec fma(vec a, vec b, vec c) { return _mm256_fmadd_ps(a, b, c); }
};

template <>
struct Kernel<double> {
  using vec = __m256d;
  static constexpr int lanes = 4;
  static constexpr int mr = 4;
  static constexpr int nv = 3;
  static vec load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, vec v) { _mm256_storeu_pd(p, v); }
  static vec broadcast(double x) { return _mm256_set1_pd(x); }
  static vec fma(vec a, vec b, vec c) { return _mm256_fmadd_pd(a, b, c); }
};

#else
constexpr const char* kKernelName = "scalar";

template <class T>
struct ScalarKernel {
  using vec = T;
  static constexpr int lanes = 1;
  static constexpr int mr = 4;
  static constexpr int nv = 4;
  static vec load(const T* p) { return *p; }
  static void store(T* p, vec v) { *p = v; }
  static vec broadcast(T x) { return x; }
  static vec fma(vec a, vec b, vec c) { return std::fma(a, b, c); }
};
template <>
struct Kernel<float> : ScalarKernel<float> {};
template <>
struct Kernel<double> : ScalarKernel<double> {};
#endif

template <class T>
constexpr int kMR = Kernel<T>::mr;
template <class T>
constexpr int kNR = Kernel<T>::lanes * Kernel<T>::nv;

// Cache blocking. KC keeps one packed B micro-panel (KC x NR) in L1 while
// A micro-panels stream from an L2-resident MC x KC block.
constexpr int kKC = 128;
constexpr int kMC = 256;
constexpr int kNCMax = 64 * 48;

struct FreeDeleter {
  void operator()(void* p) const { std::free(p); }
};

template <class T>
class ScratchBuffer {
 public:
  T* get(std::size_t count) {
    if (count > capacity_) {
      const std::size_t bytes = ((count * sizeof(T) + 63) / 64) * 64;
      data_.reset(static_cast<T*>(std::aligned_alloc(64, bytes)));
      if (!data_) throw std::bad_alloc();
      capacity_ = count;
    }
    return data_.get();
  }

 private:
  std::unique_ptr<T[], FreeDeleter> data_;
  std::size_t capacity_ = 0;
};

template <class T>
void micro_kernel(int kc, const T* __restrict ap, const T* __restrict bp, T* __restrict c,
                  std::ptrdiff_t ldc) {
  using K = Kernel<T>;
  typename K::vec acc[K::mr][K::nv];
#pragma GCC unroll 8
  for (int r = 0; r < K::mr; ++r) {
#pragma GCC unroll 4
    for (int v = 0; v < K::nv; ++v) acc[r][v] = K::load(c + r * ldc + v * K::lanes);
  }
  for (int p = 0; p < kc; ++p) {
    typename K::vec bv[K::nv];
#pragma GCC unroll 4
    for (int v = 0; v < K::nv; ++v) bv[v] = K::load(bp + v * K::lanes);
#pragma GCC unroll 8
    for (int r = 0; r < K::mr; ++r) {
      const typename K::vec av = K::broadcast(ap[r]);
#pragma GCC unroll 4
      for (int v = 0; v < K::nv; ++v) acc[r][v] = K::fma(av, bv[v], acc[r][v]);
    }
    ap += K::mr;
    bp += kNR<T>;
  }
#pragma GCC unroll 8
  for (int r = 0; r < K::mr; ++r) {
#pragma GCC unroll 4
    for (int v = 0; v < K::nv; ++v) K::store(c + r * ldc + v * K::lanes, acc[r][v]);
  }
}

// Packs rows [i0, i0+mc) x cols [p0, p0+kc) of A into MR-row micro-panels,
// k-major inside each panel; rows past m are zero.
template <class T>
void pack_a(int mc, int kc, MatrixView<T> a, int i0, int p0, T* out) {
  constexpr int MR = kMR<T>;
  for (int ir = 0; ir < mc; ir += MR) {
    const int rows = std::min(MR, mc - ir);
    for (int p = 0; p < kc; ++p) {
      int r = 0;
      for (; r < rows; ++r) out[r] = a(i0 + ir + r, p0 + p);
      for (; r < MR; ++r) out[r] = T(0);
      out += MR;
    }
  }
}

template <class T>
void pack_b(int kc, int nc, MatrixView<T> b, int p0, int j0, T* out) {
  constexpr int NR = kNR<T>;
  for (int jr = 0; jr < nc; jr += NR) {
    const int cols = std::min(NR, nc - jr);
    if (b.col_stride == 1) {
      for (int p = 0; p < kc; ++p) {
        const T* src = &b(p0 + p, j0 + jr);
        std::memcpy(out, src, sizeof(T) * cols);
        std::fill(out + cols, out + NR, T(0));
        out += NR;
      }
    } else {
      // Column-wise walk keeps the strided source reads inside a few cache lines.
      for (int j = 0; j < cols; ++j) {
        const T* src = &b(p0, j0 + jr + j);
        for (int p = 0; p < kc; ++p) out[p * NR + j] = src[p * b.row_stride];
      }
      for (int p = 0; p < kc; ++p) std::fill(out + p * NR + cols, out + (p + 1) * NR, T(0));
      out += static_cast<std::ptrdiff_t>(kc) * NR;
    }
  }
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

const char* gemm_kernel_name() { return kKernelName; }

template <class T>
void gemm_accumulate(int m, int n, int k, MatrixView<T> a, MatrixView<T> b, T* c, std::ptrdiff_t ldc) {
  if (m <= 0 || n <= 0 || k <= 0) return;
  constexpr int MR = kMR<T>;
  constexpr int NR = kNR<T>;

  const int threads = std::max(1, omp_get_max_threads());
  int nc = ceil_div(ceil_div(n, threads), NR) * NR;
  nc = std::clamp(nc, NR, kNCMax);
  const int n_blocks = ceil_div(n, nc);

#pragma omp parallel for schedule(static) if (n_blocks > 1)
  for (int jb = 0; jb < n_blocks; ++jb) {
    thread_local ScratchBuffer<T> a_buf;
    thread_local ScratchBuffer<T> b_buf;
    const int j0 = jb * nc;
    const int ncur = std::min(nc, n - j0);
    const int mc_max = std::min(kMC, ceil_div(m, MR) * MR);
    T* a_pack = a_buf.get(static_cast<std::size_t>(mc_max) * kKC);
    T* b_pack = b_buf.get(static_cast<std::size_t>(ceil_div(ncur, NR)) * NR * kKC);
    alignas(64) T edge[MR * NR];

    for (int p0 = 0; p0 < k; p0 += kKC) {
      const int kc = std::min(kKC, k - p0);
      pack_b(kc, ncur, b, p0, j0, b_pack);
      for (int i0 = 0; i0 < m; i0 += kMC) {
        const int mc = std::min(kMC, m - i0);
        pack_a(mc, kc, a, i0, p0, a_pack);
        for (int jr = 0; jr < ncur; jr += NR) {
          const int cols = std::min(NR, ncur - jr);
          const T* bp = b_pack + static_cast<std::ptrdiff_t>(jr) * kc;
          for (int ir = 0; ir < mc; ir += MR) {
            const int rows = std::min(MR, mc - ir);
            const T* ap = a_pack + static_cast<std::ptrdiff_t>(ir) * kc;
            T* ct = c + (i0 + ir) * ldc + j0 + jr;
            if (rows == MR && cols == NR) {
              micro_kernel<T>(kc, ap, bp, ct, ldc);
            } else {
              for (int r = 0; r < rows; ++r) {
                std::copy(ct + r * ldc, ct + r * ldc + cols, edge + r * NR);
                std::fill(edge + r * NR + cols, edge + (r + 1) * NR, T(0));
              }
              for (int r = rows; r < MR; ++r) std::fill(edge + r * NR, edge + (r + 1) * NR, T(0));
              micro_kernel<T>(kc, ap, bp, edge, NR);
              for (int r = 0; r < rows; ++r) std::copy(edge + r * NR, edge + r * NR + cols, ct + r * ldc);
            }
          }
        }
      }
    }
  }
}

template void gemm_accumulate<float>(int, int, int, MatrixView<float>, MatrixView<float>, float*,
                                     std::ptrdiff_t);
template void gemm_accumulate<double>(int, int, int, MatrixView<double>, MatrixView<double>, double*,
                                      std::ptrdiff_t);

}  // namespace n2f::detail
