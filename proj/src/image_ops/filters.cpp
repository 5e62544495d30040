#include <algorithm>
#include <cmath>
#include <string>

#include "kasr/image_ops.hpp"
#include "kasr/ops.hpp"

namespace kasr {

double Kernel2D::sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

Kernel2D Kernel2D::delta(std::size_t size) {
  Kernel2D k;
  k.rows = k.cols = size;
  k.values.assign(size * size, 0.0);
  k.values[(size / 2) * size + size / 2] = 1.0;
  return k;
}

Kernel2D Kernel2D::box(std::size_t size) {
  Kernel2D k;
  k.rows = k.cols = size;
  k.values.assign(size * size, 1.0 / static_cast<double>(size * size));
  return k;
}

void DegradationSpec::validate() const {
  if (scale < 1 || scale > 4) {
    throw ContractError("degradation scale must be one of 1, 2, 3, 4; got " + std::to_string(scale));
  }
  if (kernel.rows == 0 || kernel.cols == 0 || kernel.values.size() != kernel.rows * kernel.cols) {
    throw ContractError("degradation kernel has inconsistent extents");
  }
  for (double v : kernel.values) {
    if (!std::isfinite(v)) throw ContractError("degradation kernel has a non-finite entry");
  }
  if (std::abs(kernel.sum() - 1.0) >= 1e-6) {
    throw ContractError("degradation kernel must sum to 1, sums to " + std::to_string(kernel.sum()));
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ContractError("noise sigma must be finite and non-negative");
  }
}

Kernel2D gaussian_kernel(std::size_t size, double sigma) {
  if (size == 0 || size % 2 == 0) {
    throw ContractError("gaussian_kernel: size must be odd and positive, got " + std::to_string(size));
  }
  if (!(sigma > 0.0)) throw ContractError("gaussian_kernel: sigma must be positive");
  Kernel2D k;
  k.rows = k.cols = size;
  k.values.resize(size * size);
  const double c = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t q = 0; q < size; ++q) {
      const double dy = static_cast<double>(r) - c;
      const double dx = static_cast<double>(q) - c;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k.values[r * size + q] = v;
      total += v;
    }
  }
  for (double& v : k.values) v /= total;
  return k;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

Tensor degrade_classical(const Tensor& hr, const DegradationSpec& spec) {
  expect_image_batch(hr, "degrade_classical");
  spec.validate();
  const Shape& s = hr.shape();
  const std::size_t sc = spec.scale;
  if (s[2] % sc != 0) {
    throw DimensionError("degrade_classical", "height",
                         std::to_string(s[2]) + " not divisible by scale " + std::to_string(sc));
  }
  if (s[3] % sc != 0) {
    throw DimensionError("degrade_classical", "width",
                         std::to_string(s[3]) + " not divisible by scale " + std::to_string(sc));
  }
  const std::size_t h = s[2], w = s[3], oh = h / sc, ow = w / sc;
  const std::size_t planes = s[0] * s[1];
  const auto ch = static_cast<std::ptrdiff_t>(spec.kernel.rows / 2);
  const auto cw = static_cast<std::ptrdiff_t>(spec.kernel.cols / 2);
  const auto x = hr.data();
  std::vector<double> blurred(planes * oh * ow);

  const auto plane_count = static_cast<std::ptrdiff_t>(planes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pl = 0; pl < plane_count; ++pl) {
    const float* src = x.data() + static_cast<std::size_t>(pl) * h * w;
    double* dst = blurred.data() + static_cast<std::size_t>(pl) * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const auto y = static_cast<std::ptrdiff_t>(oy * sc);
        const auto xx = static_cast<std::ptrdiff_t>(ox * sc);
        double acc = 0.0;
        for (std::size_t i = 0; i < spec.kernel.rows; ++i) {
          const std::size_t sy = reflect_index(y + ch - static_cast<std::ptrdiff_t>(i), h);
          for (std::size_t j = 0; j < spec.kernel.cols; ++j) {
            const std::size_t sx = reflect_index(xx + cw - static_cast<std::ptrdiff_t>(j), w);
            acc += spec.kernel.at(i, j) * src[sy * w + sx];
          }
        }
        dst[oy * ow + ox] = acc;
      }
    }
  }

  std::vector<float> out(blurred.size());
  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);
  for (std::size_t i = 0; i < blurred.size(); ++i) {
    double v = blurred[i];
    if (spec.noise_sigma > 0) v += noise(rng);
    out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return Tensor(Shape{s[0], s[1], oh, ow}, std::move(out));
}

namespace {
constexpr double kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
constexpr double kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
}  // namespace

template <typename T>
BasicTensor<T> sobel_map(const BasicTensor<T>& img) {
  expect_image_batch(img, "sobel_map");
  const Shape& s = img.shape();
  const std::size_t h = s[2], w = s[3], plane = h * w;
  const std::size_t planes = s[0] * s[1];
  const auto x = img.data();
  std::vector<T> gx(img.numel()), gy(img.numel()), mag(img.numel());

  const auto plane_count = static_cast<std::ptrdiff_t>(planes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pl = 0; pl < plane_count; ++pl) {
    const std::size_t base = static_cast<std::size_t>(pl) * plane;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        double ax = 0, ay = 0;
        for (int i = 0; i < 3; ++i) {
          const std::size_t sy = reflect_index(static_cast<std::ptrdiff_t>(y) + i - 1, h);
          for (int j = 0; j < 3; ++j) {
            const std::size_t sx = reflect_index(static_cast<std::ptrdiff_t>(xx) + j - 1, w);
            const double v = x[base + sy * w + sx];
            ax += kSobelX[i][j] * v;
            ay += kSobelY[i][j] * v;
          }
        }
        const std::size_t o = base + y * w + xx;
        gx[o] = static_cast<T>(ax);
        gy[o] = static_cast<T>(ay);
        mag[o] = static_cast<T>(std::sqrt(ax * ax + ay * ay + kSqrtEpsilon));
      }
    }
  }

  std::vector<T> out = mag;
  return BasicTensor<T>::from_op(
      s, std::move(out), OpKind::Sobel, {img},
      [img, gx = std::move(gx), gy = std::move(gy), mag = std::move(mag), h, w, plane,
       planes](std::span<const T> grad) {
        auto gi = img.grad_buffer();
        for (std::size_t pl = 0; pl < planes; ++pl) {
          const std::size_t base = pl * plane;
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t xx = 0; xx < w; ++xx) {
              const std::size_t o = base + y * w + xx;
              const T cx = grad[o] * gx[o] / mag[o];
              const T cy = grad[o] * gy[o] / mag[o];
              for (int i = 0; i < 3; ++i) {
                const std::size_t sy = reflect_index(static_cast<std::ptrdiff_t>(y) + i - 1, h);
                for (int j = 0; j < 3; ++j) {
                  const std::size_t sx = reflect_index(static_cast<std::ptrdiff_t>(xx) + j - 1, w);
                  gi[base + sy * w + sx] += cx * static_cast<T>(kSobelX[i][j]) + cy * static_cast<T>(kSobelY[i][j]);
                }
              }
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> minmax_normalize(const BasicTensor<T>& map) {
  expect_image_batch(map, "minmax_normalize");
  const std::size_t batch = map.size(0);
  const std::size_t per = map.numel() / batch;
  const auto x = map.data();
  std::vector<T> out(map.numel(), T(0));
  std::vector<std::size_t> lo_at(batch), hi_at(batch);
  std::vector<T> range(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t base = b * per;
    std::size_t lo = base, hi = base;
    for (std::size_t i = base + 1; i < base + per; ++i) {
      if (x[i] < x[lo]) lo = i;
      if (x[i] > x[hi]) hi = i;
    }
    lo_at[b] = lo;
    hi_at[b] = hi;
    range[b] = x[hi] - x[lo];
    if (static_cast<double>(range[b]) < kMinMaxDegenerate) continue;
    for (std::size_t i = base; i < base + per; ++i) out[i] = (x[i] - x[lo]) / range[b];
  }
  std::vector<T> y = out;
  return BasicTensor<T>::from_op(
      map.shape(), std::move(out), OpKind::MinMaxNormalize, {map},
      [map, y = std::move(y), lo_at, hi_at, range, per, batch](std::span<const T> grad) {
        auto gi = map.grad_buffer();
        for (std::size_t b = 0; b < batch; ++b) {
          if (static_cast<double>(range[b]) < kMinMaxDegenerate) continue;
          const std::size_t base = b * per;
          const T r = range[b];
          double to_lo = 0.0, to_hi = 0.0;
          for (std::size_t i = base; i < base + per; ++i) {
            gi[i] += grad[i] / r;
            to_lo += static_cast<double>(grad[i]) * (static_cast<double>(y[i]) - 1.0);
            to_hi -= static_cast<double>(grad[i]) * static_cast<double>(y[i]);
          }
          gi[lo_at[b]] += static_cast<T>(to_lo / r);
          gi[hi_at[b]] += static_cast<T>(to_hi / r);
        }
      });
}

template BasicTensor<float> sobel_map<float>(const BasicTensor<float>&);
template BasicTensor<double> sobel_map<double>(const BasicTensor<double>&);
template BasicTensor<float> minmax_normalize<float>(const BasicTensor<float>&);
template BasicTensor<double> minmax_normalize<double>(const BasicTensor<double>&);

}  // namespace kasr
