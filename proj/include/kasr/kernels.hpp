#pragma once

// Raw compute kernels behind the differentiable ops. Each hot kernel has an
// OpenMP-parallel version and a plain serial reference in `reference::` that
// the tests and the benchmark compare against.
//
// Every parallel loop gives each output element to exactly one iteration and
// sums in a fixed order, so results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace kasr::kernels {

struct Conv2dGeometry {
  std::size_t batch = 0;
  std::size_t in_c = 0, in_h = 0, in_w = 0;
  std::size_t out_c = 0, k_h = 0, k_w = 0;
  std::size_t stride = 1, pad = 0;
  std::size_t out_h = 0, out_w = 0;

  /// Validates and fills the output extents. Throws DimensionError.
  static Conv2dGeometry make(std::size_t batch, std::size_t in_c, std::size_t in_h, std::size_t in_w,
                             std::size_t out_c, std::size_t k_h, std::size_t k_w, std::size_t stride,
                             std::size_t pad);

  std::size_t patch_size() const { return in_c * k_h * k_w; }
  std::size_t out_plane() const { return out_h * out_w; }
};

/// C = A * B (or C += A * B), row-major, A: m x k, B: k x n, C: m x n.
template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

/// out (rows x cols) = in^T for in (cols x rows).
template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* in, T* out);

/// One image (in_c x in_h x in_w) to a (in_c*k_h*k_w) x (out_h*out_w) patch matrix.
template <typename T>
void im2col(const Conv2dGeometry& g, const T* image, T* col);

/// Adjoint of im2col: scatters-adds patch columns back into an image.
template <typename T>
void col2im_add(const Conv2dGeometry& g, const T* col, T* image);

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);

/// Accumulates into any non-empty gradient span.
template <typename T>
void conv2d_backward(const Conv2dGeometry& g, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_out, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias);

struct PoolGeometry {
  std::size_t planes = 0;  // batch * channels
  std::size_t in_h = 0, in_w = 0;
  std::size_t window = 1, stride = 1;
  std::size_t out_h = 0, out_w = 0;

  static PoolGeometry make(std::size_t planes, std::size_t in_h, std::size_t in_w, std::size_t window,
                           std::size_t stride);
};

/// Writes the max and the flat input index of the first maximal element.
template <typename T>
void maxpool_forward(const PoolGeometry& g, std::span<const T> input, std::span<T> output,
                     std::span<std::size_t> argmax);

namespace reference {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);

template <typename T>
void conv2d_backward(const Conv2dGeometry& g, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_out, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias);

template <typename T>
void maxpool_forward(const PoolGeometry& g, std::span<const T> input, std::span<T> output,
                     std::span<std::size_t> argmax);

}  // namespace reference

int max_threads();

}  // namespace kasr::kernels
