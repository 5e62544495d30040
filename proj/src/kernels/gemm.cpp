#include <algorithm>
#include <cstring>

#include "kasr/kernels.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace kasr::kernels {

namespace {

constexpr std::size_t kTileCols = 32;

// rows x kTileCols block of C kept in registers while streaming over k.
template <std::size_t Rows, typename T>
inline void gemm_tile(std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  T acc[Rows][kTileCols];
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t j = 0; j < kTileCols; ++j) acc[r][j] = accumulate ? c[r * n + j] : T(0);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = b + p * n;
#pragma GCC unroll 4
    for (std::size_t r = 0; r < Rows; ++r) {
      const T av = a[r * k + p];
#pragma omp simd
      for (std::size_t j = 0; j < kTileCols; ++j) acc[r][j] += av * brow[j];
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t j = 0; j < kTileCols; ++j) c[r * n + j] = acc[r][j];
  }
}

template <typename T>
inline void gemm_edge(std::size_t rows, std::size_t cols, std::size_t n, std::size_t k, const T* a,
                      const T* b, T* c, bool accumulate) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      T acc = accumulate ? c[r * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[r * k + p] * b[p * n + j];
      c[r * n + j] = acc;
    }
  }
}

}  // namespace

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  const std::size_t tiles = (n + kTileCols - 1) / kTileCols;
  const auto tile_count = static_cast<std::ptrdiff_t>(tiles);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < tile_count; ++t) {
    const std::size_t j0 = static_cast<std::size_t>(t) * kTileCols;
    const std::size_t cols = std::min(kTileCols, n - j0);
    std::size_t i = 0;
    if (cols == kTileCols) {
      for (; i + 4 <= m; i += 4) gemm_tile<4>(n, k, a + i * k, b + j0, c + i * n + j0, accumulate);
      for (; i < m; ++i) gemm_tile<1>(n, k, a + i * k, b + j0, c + i * n + j0, accumulate);
    } else {
      gemm_edge(m, cols, n, k, a, b + j0, c + j0, accumulate);
    }
  }
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* in, T* out) {
  // in is cols x rows
  constexpr std::size_t kBlock = 32;
  const auto row_blocks = static_cast<std::ptrdiff_t>((rows + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t rb = 0; rb < row_blocks; ++rb) {
    const std::size_t r0 = static_cast<std::size_t>(rb) * kBlock;
    const std::size_t r1 = std::min(rows, r0 + kBlock);
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t cc = c0; cc < c1; ++cc) out[r * cols + cc] = in[cc * rows + r];
      }
    }
  }
}

namespace reference {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

template void gemm<float>(std::size_t, std::size_t, std::size_t, const float*, const float*, float*, bool);
template void gemm<double>(std::size_t, std::size_t, std::size_t, const double*, const double*, double*, bool);

}  // namespace reference

template void gemm<float>(std::size_t, std::size_t, std::size_t, const float*, const float*, float*, bool);
template void gemm<double>(std::size_t, std::size_t, std::size_t, const double*, const double*, double*, bool);
template void transpose<float>(std::size_t, std::size_t, const float*, float*);
template void transpose<double>(std::size_t, std::size_t, const double*, double*);

}  // namespace kasr::kernels
