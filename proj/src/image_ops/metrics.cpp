#include <cmath>
#include <string>

#include "kasr/image_ops.hpp"
#include "kasr/ops.hpp"

namespace kasr {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  expect_image_batch(a, op);
  expect_image_batch(b, op);
  for (std::size_t i = 0; i < 4; ++i) {
    if (a.size(i) != b.size(i)) {
      throw DimensionError(op, std::to_string(i), shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
  }
}

constexpr std::size_t kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

std::vector<double> gaussian_1d() {
  std::vector<double> g(kWindow);
  double total = 0.0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(kWindow / 2);
    g[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid-region separable filtering of a plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
  const std::size_t oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> tmp(h * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * src[y * w + x + k];
      tmp[y * ow + x] = acc;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * tmp[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
  require_same(a, b, "psnr");
  const auto x = a.data();
  const auto y = b.data();
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensor& a, const Tensor& b) {
  require_same(a, b, "ssim");
  const std::size_t h = a.size(2), w = a.size(3);
  if (h < kWindow || w < kWindow) {
    throw ContractError("ssim: images must be at least 11x11, got " + shape_str(a.shape()));
  }
  const auto g = gaussian_1d();
  const std::size_t plane = h * w, planes = a.size(0) * a.size(1);
  double total = 0.0;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = a.data()[pl * plane + i];
      y[i] = b.data()[pl * plane + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, g);
    const auto my = filter_valid(y, h, w, g);
    const auto sxx = filter_valid(xx, h, w, g);
    const auto syy = filter_valid(yy, h, w, g);
    const auto sxy = filter_valid(xy, h, w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(planes);
}

}  // namespace kasr
