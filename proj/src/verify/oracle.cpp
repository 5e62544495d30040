#include "kasr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kasr::oracle {

Image make_image(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  return Image{n, c, h, w, std::vector<double>(n * c * h * w, 0.0)};
}

std::size_t mirror(long i, std::size_t n) {
  const long m = static_cast<long>(n);
  if (m == 1) return 0;
  while (i < 0 || i >= m) {
    if (i < 0) i = -i;
    if (i >= m) i = 2 * (m - 1) - i;
  }
  return static_cast<std::size_t>(i);
}

Image conv2d(const Image& x, const std::vector<double>& weight, const std::vector<double>& bias, std::size_t oc,
             std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad) {
  const std::size_t oh = (x.h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (x.w + 2 * pad - kw) / stride + 1;
  Image out = make_image(x.n, oc, oh, ow);
  for (std::size_t b = 0; b < x.n; ++b)
    for (std::size_t o = 0; o < oc; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = bias[o];
          for (std::size_t i = 0; i < x.c; ++i)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long sy = static_cast<long>(y * stride + u) - static_cast<long>(pad);
                const long sx = static_cast<long>(xx * stride + v) - static_cast<long>(pad);
                if (sy < 0 || sx < 0 || sy >= static_cast<long>(x.h) || sx >= static_cast<long>(x.w)) continue;
                acc += weight[((o * x.c + i) * kh + u) * kw + v] * x.at(b, i, sy, sx);
              }
          out.at(b, o, y, xx) = acc;
        }
  return out;
}

Image maxpool(const Image& x, std::size_t window, std::size_t stride) {
  const std::size_t oh = (x.h - window) / stride + 1, ow = (x.w - window) / stride + 1;
  Image out = make_image(x.n, x.c, oh, ow);
  for (std::size_t b = 0; b < x.n; ++b)
    for (std::size_t c = 0; c < x.c; ++c)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double m = -std::numeric_limits<double>::infinity();
          for (std::size_t u = 0; u < window; ++u)
            for (std::size_t v = 0; v < window; ++v) m = std::max(m, x.at(b, c, y * stride + u, xx * stride + v));
          out.at(b, c, y, xx) = m;
        }
  return out;
}

Image sobel(const Image& x) {
  static const double sx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const double sy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  Image out = make_image(x.n, x.c, x.h, x.w);
  for (std::size_t b = 0; b < x.n; ++b)
    for (std::size_t c = 0; c < x.c; ++c)
      for (std::size_t y = 0; y < x.h; ++y)
        for (std::size_t xx = 0; xx < x.w; ++xx) {
          double gx = 0, gy = 0;
          for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v) {
              const double p = x.at(b, c, mirror(static_cast<long>(y) + u - 1, x.h),
                                    mirror(static_cast<long>(xx) + v - 1, x.w));
              gx += sx[u][v] * p;
              gy += sy[u][v] * p;
            }
          out.at(b, c, y, xx) = std::sqrt(gx * gx + gy * gy + 1e-12);
        }
  return out;
}

Image minmax(const Image& x) {
  Image out = x;
  const std::size_t per = x.c * x.h * x.w;
  for (std::size_t b = 0; b < x.n; ++b) {
    const auto first = x.v.begin() + static_cast<long>(b * per);
    const double lo = *std::min_element(first, first + static_cast<long>(per));
    const double hi = *std::max_element(first, first + static_cast<long>(per));
    for (std::size_t i = 0; i < per; ++i) {
      out.v[b * per + i] = hi - lo < 1e-12 ? 0.0 : (x.v[b * per + i] - lo) / (hi - lo);
    }
  }
  return out;
}

Image blur_subsample(const Image& x, const std::vector<double>& kernel, std::size_t kr, std::size_t kc,
                     std::size_t scale) {
  Image full = make_image(x.n, x.c, x.h, x.w);
  const long cr = static_cast<long>(kr / 2), cc = static_cast<long>(kc / 2);
  for (std::size_t b = 0; b < x.n; ++b)
    for (std::size_t c = 0; c < x.c; ++c)
      for (std::size_t y = 0; y < x.h; ++y)
        for (std::size_t xx = 0; xx < x.w; ++xx) {
          double acc = 0;
          for (std::size_t i = 0; i < kr; ++i)
            for (std::size_t j = 0; j < kc; ++j) {
              // (x * k)(y) = sum_t k(t) x(y - t), t measured from the kernel centre
              const long ty = static_cast<long>(i) - cr, tx = static_cast<long>(j) - cc;
              acc += kernel[i * kc + j] * x.at(b, c, mirror(static_cast<long>(y) - ty, x.h),
                                                mirror(static_cast<long>(xx) - tx, x.w));
            }
          full.at(b, c, y, xx) = acc;
        }
  Image out = make_image(x.n, x.c, x.h / scale, x.w / scale);
  for (std::size_t b = 0; b < x.n; ++b)
    for (std::size_t c = 0; c < x.c; ++c)
      for (std::size_t y = 0; y < out.h; ++y)
        for (std::size_t xx = 0; xx < out.w; ++xx) out.at(b, c, y, xx) = full.at(b, c, y * scale, xx * scale);
  return out;
}

namespace {

double keys(double t) {
  const double a = -0.5, u = std::abs(t);
  if (u <= 1) return (a + 2) * u * u * u - (a + 3) * u * u + 1;
  if (u < 2) return a * u * u * u - 5 * a * u * u + 8 * a * u - 4 * a;
  return 0.0;
}

}  // namespace

Image bicubic(const Image& x, std::size_t out_h, std::size_t out_w) {
  Image out = make_image(x.n, x.c, out_h, out_w);
  const double ry = static_cast<double>(x.h) / static_cast<double>(out_h);
  const double rx = static_cast<double>(x.w) / static_cast<double>(out_w);
  for (std::size_t b = 0; b < x.n; ++b)
    for (std::size_t c = 0; c < x.c; ++c)
      for (std::size_t y = 0; y < out_h; ++y)
        for (std::size_t xx = 0; xx < out_w; ++xx) {
          const double fy = (static_cast<double>(y) + 0.5) * ry - 0.5;
          const double fx = (static_cast<double>(xx) + 0.5) * rx - 0.5;
          const long y0 = static_cast<long>(std::floor(fy)), x0 = static_cast<long>(std::floor(fx));
          double acc = 0;
          for (long i = y0 - 1; i <= y0 + 2; ++i)
            for (long j = x0 - 1; j <= x0 + 2; ++j) {
              const long cy = std::clamp(i, 0L, static_cast<long>(x.h) - 1);
              const long cx = std::clamp(j, 0L, static_cast<long>(x.w) - 1);
              acc += keys(fy - static_cast<double>(i)) * keys(fx - static_cast<double>(j)) * x.at(b, c, cy, cx);
            }
          out.at(b, c, y, xx) = acc;
        }
  return out;
}

double psnr(const Image& a, const Image& b) {
  double se = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) se += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
  const double mse = se / static_cast<double>(a.v.size());
  return mse == 0.0 ? 100.0 : 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  constexpr int kWin = 11;
  double g[kWin], gs = 0;
  for (int i = 0; i < kWin; ++i) {
    g[i] = std::exp(-(i - 5) * (i - 5) / (2 * 1.5 * 1.5));
    gs += g[i];
  }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < a.n; ++n)
    for (std::size_t c = 0; c < a.c; ++c) {
      double chan = 0;
      std::size_t windows = 0;
      for (std::size_t y = 0; y + kWin <= a.h; ++y)
        for (std::size_t x = 0; x + kWin <= a.w; ++x) {
          double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
          for (int u = 0; u < kWin; ++u)
            for (int v = 0; v < kWin; ++v) {
              const double w = g[u] * g[v] / (gs * gs);
              const double p = a.at(n, c, y + u, x + v), q = b.at(n, c, y + u, x + v);
              mx += w * p;
              my += w * q;
              xx += w * p * p;
              yy += w * q * q;
              xy += w * p * q;
            }
          const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
          chan += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
          ++windows;
        }
      total += chan / static_cast<double>(windows);
      ++count;
    }
  return total / static_cast<double>(count);
}

double bce_with_logits(const std::vector<double>& logits, double target) {
  double s = 0;
  for (double z : logits) {
    // log(1 + e^z) = max(z, 0) + log(e^{-max} + e^{z - max})
    const double m = std::max(z, 0.0);
    s += m + std::log(std::exp(-m) + std::exp(z - m)) - target * z;
  }
  return s / static_cast<double>(logits.size());
}

}  // namespace kasr::oracle
