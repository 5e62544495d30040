#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "kasr/errors.hpp"
#include "kasr/kernels.hpp"

namespace kasr::kernels {

Conv2dGeometry Conv2dGeometry::make(std::size_t batch, std::size_t in_c, std::size_t in_h, std::size_t in_w,
                                    std::size_t out_c, std::size_t k_h, std::size_t k_w, std::size_t stride,
                                    std::size_t pad) {
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  const std::size_t ph = in_h + 2 * pad;
  const std::size_t pw = in_w + 2 * pad;
  if (k_h > ph) {
    throw DimensionError("conv2d", "height",
                         "kernel height " + std::to_string(k_h) + " exceeds padded height " + std::to_string(ph));
  }
  if (k_w > pw) {
    throw DimensionError("conv2d", "width",
                         "kernel width " + std::to_string(k_w) + " exceeds padded width " + std::to_string(pw));
  }
  Conv2dGeometry g;
  g.batch = batch;
  g.in_c = in_c;
  g.in_h = in_h;
  g.in_w = in_w;
  g.out_c = out_c;
  g.k_h = k_h;
  g.k_w = k_w;
  g.stride = stride;
  g.pad = pad;
  g.out_h = (ph - k_h) / stride + 1;
  g.out_w = (pw - k_w) / stride + 1;
  return g;
}

template <typename T>
void im2col(const Conv2dGeometry& g, const T* image, T* col) {
  const std::size_t plane = g.out_plane();
  const auto rows = static_cast<std::ptrdiff_t>(g.patch_size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t row = 0; row < rows; ++row) {
    const std::size_t r = static_cast<std::size_t>(row);
    const std::size_t c = r / (g.k_h * g.k_w);
    const std::size_t ky = (r / g.k_w) % g.k_h;
    const std::size_t kx = r % g.k_w;
    const T* src = image + c * g.in_h * g.in_w;
    T* dst = col + r * plane;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
      T* drow = dst + oy * g.out_w;
      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) {
        std::fill(drow, drow + g.out_w, T(0));
        continue;
      }
      const T* srow = src + static_cast<std::size_t>(iy) * g.in_w;
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const std::ptrdiff_t ix =
            static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
        drow[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) ? T(0) : srow[ix];
      }
    }
  }
}

template <typename T>
void col2im_add(const Conv2dGeometry& g, const T* col, T* image) {
  const std::size_t plane = g.out_plane();
  const auto channels = static_cast<std::ptrdiff_t>(g.in_c);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ch = 0; ch < channels; ++ch) {
    const std::size_t c = static_cast<std::size_t>(ch);
    T* dst = image + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.k_h; ++ky) {
      for (std::size_t kx = 0; kx < g.k_w; ++kx) {
        const T* src = col + ((c * g.k_h + ky) * g.k_w + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          T* drow = dst + static_cast<std::size_t>(iy) * g.in_w;
          const T* srow = src + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.in_w)) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

namespace {
bool is_pointwise(const Conv2dGeometry& g) {
  return g.k_h == 1 && g.k_w == 1 && g.stride == 1 && g.pad == 0;
}
}  // namespace

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const std::size_t in_img = g.in_c * g.in_h * g.in_w;
  const std::size_t out_img = g.out_c * g.out_plane();
  const std::size_t plane = g.out_plane();
  std::vector<T> col(is_pointwise(g) ? 0 : g.patch_size() * plane);
  for (std::size_t b = 0; b < g.batch; ++b) {
    const T* src = input.data() + b * in_img;
    T* dst = output.data() + b * out_img;
    const T* patches = src;
    if (!is_pointwise(g)) {
      im2col(g, src, col.data());
      patches = col.data();
    }
    gemm(g.out_c, plane, g.patch_size(), weight.data(), patches, dst, false);
    const auto oc_count = static_cast<std::ptrdiff_t>(g.out_c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t oc = 0; oc < oc_count; ++oc) {
      const T bv = bias[static_cast<std::size_t>(oc)];
      T* row = dst + static_cast<std::size_t>(oc) * plane;
      for (std::size_t p = 0; p < plane; ++p) row[p] += bv;
    }
  }
}

template <typename T>
void conv2d_backward(const Conv2dGeometry& g, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_out, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias) {
  const std::size_t in_img = g.in_c * g.in_h * g.in_w;
  const std::size_t plane = g.out_plane();
  const std::size_t out_img = g.out_c * plane;
  const std::size_t kdim = g.patch_size();

  if (!grad_bias.empty()) {
    const auto oc_count = static_cast<std::ptrdiff_t>(g.out_c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t oc = 0; oc < oc_count; ++oc) {
      double acc = 0.0;
      for (std::size_t b = 0; b < g.batch; ++b) {
        const T* row = grad_out.data() + b * out_img + static_cast<std::size_t>(oc) * plane;
        for (std::size_t p = 0; p < plane; ++p) acc += row[p];
      }
      grad_bias[static_cast<std::size_t>(oc)] += static_cast<T>(acc);
    }
  }

  if (!grad_weight.empty()) {
    std::vector<T> col(is_pointwise(g) ? 0 : kdim * plane);
    std::vector<T> col_t(kdim * plane);
    for (std::size_t b = 0; b < g.batch; ++b) {
      const T* src = input.data() + b * in_img;
      const T* patches = src;
      if (!is_pointwise(g)) {
        im2col(g, src, col.data());
        patches = col.data();
      }
      transpose(plane, kdim, patches, col_t.data());
      gemm(g.out_c, kdim, plane, grad_out.data() + b * out_img, col_t.data(), grad_weight.data(), true);
    }
  }

  if (!grad_input.empty()) {
    std::vector<T> w_t(kdim * g.out_c);
    transpose(kdim, g.out_c, weight.data(), w_t.data());
    std::vector<T> dcol(kdim * plane);
    for (std::size_t b = 0; b < g.batch; ++b) {
      T* dst = grad_input.data() + b * in_img;
      if (is_pointwise(g)) {
        gemm(kdim, plane, g.out_c, w_t.data(), grad_out.data() + b * out_img, dst, true);
      } else {
        gemm(kdim, plane, g.out_c, w_t.data(), grad_out.data() + b * out_img, dcol.data(), false);
        col2im_add(g, dcol.data(), dst);
      }
    }
  }
}

PoolGeometry PoolGeometry::make(std::size_t planes, std::size_t in_h, std::size_t in_w, std::size_t window,
                                std::size_t stride) {
  if (window == 0 || stride == 0) throw ContractError("maxpool2d: window and stride must be positive");
  if (window > in_h) {
    throw DimensionError("maxpool2d", "height",
                         "window " + std::to_string(window) + " exceeds input height " + std::to_string(in_h));
  }
  if (window > in_w) {
    throw DimensionError("maxpool2d", "width",
                         "window " + std::to_string(window) + " exceeds input width " + std::to_string(in_w));
  }
  PoolGeometry g;
  g.planes = planes;
  g.in_h = in_h;
  g.in_w = in_w;
  g.window = window;
  g.stride = stride;
  g.out_h = (in_h - window) / stride + 1;
  g.out_w = (in_w - window) / stride + 1;
  return g;
}

template <typename T>
void maxpool_forward(const PoolGeometry& g, std::span<const T> input, std::span<T> output,
                     std::span<std::size_t> argmax) {
  const auto planes = static_cast<std::ptrdiff_t>(g.planes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pl = 0; pl < planes; ++pl) {
    const std::size_t base_in = static_cast<std::size_t>(pl) * g.in_h * g.in_w;
    const std::size_t base_out = static_cast<std::size_t>(pl) * g.out_h * g.out_w;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        std::size_t best = base_in + (oy * g.stride) * g.in_w + ox * g.stride;
        T best_v = input[best];
        for (std::size_t wy = 0; wy < g.window; ++wy) {
          const std::size_t row = base_in + (oy * g.stride + wy) * g.in_w + ox * g.stride;
          for (std::size_t wx = 0; wx < g.window; ++wx) {
            if (input[row + wx] > best_v) {
              best_v = input[row + wx];
              best = row + wx;
            }
          }
        }
        output[base_out + oy * g.out_w + ox] = best_v;
        argmax[base_out + oy * g.out_w + ox] = best;
      }
    }
  }
}

namespace reference {

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const auto in_at = [&](std::size_t b, std::size_t c, std::ptrdiff_t y, std::ptrdiff_t x) -> T {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h) || x >= static_cast<std::ptrdiff_t>(g.in_w)) {
      return T(0);
    }
    return input[((b * g.in_c + c) * g.in_h + static_cast<std::size_t>(y)) * g.in_w + static_cast<std::size_t>(x)];
  };
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          T acc = bias[oc];
          for (std::size_t ic = 0; ic < g.in_c; ++ic) {
            for (std::size_t ky = 0; ky < g.k_h; ++ky) {
              for (std::size_t kx = 0; kx < g.k_w; ++kx) {
                const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                const auto x = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                acc += in_at(b, ic, y, x) * weight[((oc * g.in_c + ic) * g.k_h + ky) * g.k_w + kx];
              }
            }
          }
          output[((b * g.out_c + oc) * g.out_h + oy) * g.out_w + ox] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const Conv2dGeometry& g, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_out, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias) {
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const T go = grad_out[((b * g.out_c + oc) * g.out_h + oy) * g.out_w + ox];
          if (!grad_bias.empty()) grad_bias[oc] += go;
          for (std::size_t ic = 0; ic < g.in_c; ++ic) {
            for (std::size_t ky = 0; ky < g.k_h; ++ky) {
              for (std::size_t kx = 0; kx < g.k_w; ++kx) {
                const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                const auto x = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h) ||
                    x >= static_cast<std::ptrdiff_t>(g.in_w)) {
                  continue;
                }
                const std::size_t ii =
                    ((b * g.in_c + ic) * g.in_h + static_cast<std::size_t>(y)) * g.in_w + static_cast<std::size_t>(x);
                const std::size_t wi = ((oc * g.in_c + ic) * g.k_h + ky) * g.k_w + kx;
                if (!grad_weight.empty()) grad_weight[wi] += go * input[ii];
                if (!grad_input.empty()) grad_input[ii] += go * weight[wi];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void maxpool_forward(const PoolGeometry& g, std::span<const T> input, std::span<T> output,
                     std::span<std::size_t> argmax) {
  std::size_t o = 0;
  for (std::size_t pl = 0; pl < g.planes; ++pl) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox, ++o) {
        T best_v = -std::numeric_limits<T>::infinity();
        std::size_t best = 0;
        bool first = true;
        for (std::size_t wy = 0; wy < g.window; ++wy) {
          for (std::size_t wx = 0; wx < g.window; ++wx) {
            const std::size_t i = (pl * g.in_h + oy * g.stride + wy) * g.in_w + ox * g.stride + wx;
            if (first || input[i] > best_v) {
              best_v = input[i];
              best = i;
              first = false;
            }
          }
        }
        output[o] = best_v;
        argmax[o] = best;
      }
    }
  }
}

}  // namespace reference

#define KASR_INSTANTIATE_CONV(T)                                                                                \
  template void im2col<T>(const Conv2dGeometry&, const T*, T*);                                                 \
  template void col2im_add<T>(const Conv2dGeometry&, const T*, T*);                                             \
  template void conv2d_forward<T>(const Conv2dGeometry&, std::span<const T>, std::span<const T>,               \
                                  std::span<const T>, std::span<T>);                                            \
  template void conv2d_backward<T>(const Conv2dGeometry&, std::span<const T>, std::span<const T>,              \
                                   std::span<const T>, std::span<T>, std::span<T>, std::span<T>);               \
  template void maxpool_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>,                      \
                                   std::span<std::size_t>);                                                     \
  template void reference::conv2d_forward<T>(const Conv2dGeometry&, std::span<const T>, std::span<const T>,    \
                                             std::span<const T>, std::span<T>);                                 \
  template void reference::conv2d_backward<T>(const Conv2dGeometry&, std::span<const T>, std::span<const T>,   \
                                              std::span<const T>, std::span<T>, std::span<T>, std::span<T>);    \
  template void reference::maxpool_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>,           \
                                              std::span<std::size_t>);

KASR_INSTANTIATE_CONV(float)
KASR_INSTANTIATE_CONV(double)

#undef KASR_INSTANTIATE_CONV

}  // namespace kasr::kernels
