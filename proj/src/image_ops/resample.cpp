#include <algorithm>
#include <cmath>
#include <string>

#include "kasr/image_ops.hpp"
#include "kasr/ops.hpp"

namespace kasr {

namespace {

double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct AxisTaps {
  std::vector<std::size_t> index;  // 4 per output
  std::vector<double> weight;      // 4 per output
};

AxisTaps make_taps(std::size_t in, std::size_t out) {
  AxisTaps taps;
  taps.index.resize(out * 4);
  taps.weight.resize(out * 4);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    for (int k = 0; k < 4; ++k) {
      const auto i = static_cast<std::ptrdiff_t>(base) + k - 1;
      const std::ptrdiff_t clamped = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(in) - 1);
      taps.index[o * 4 + k] = static_cast<std::size_t>(clamped);
      taps.weight[o * 4 + k] = cubic_weight(t - static_cast<double>(k - 1));
    }
  }
  return taps;
}

}  // namespace

Tensor bicubic_resize(const Tensor& img, std::size_t out_h, std::size_t out_w) {
  expect_image_batch(img, "bicubic_resize");
  if (out_h == 0 || out_w == 0) throw ContractError("bicubic_resize: target dimensions must be at least 1");
  const Shape& s = img.shape();
  const std::size_t h = s[2], w = s[3], planes = s[0] * s[1];
  const AxisTaps ty = make_taps(h, out_h);
  const AxisTaps tx = make_taps(w, out_w);
  const auto x = img.data();
  std::vector<float> out(planes * out_h * out_w);

  const auto plane_count = static_cast<std::ptrdiff_t>(planes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pl = 0; pl < plane_count; ++pl) {
    const float* src = x.data() + static_cast<std::size_t>(pl) * h * w;
    std::vector<double> rows(h * out_w);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += tx.weight[ox * 4 + k] * src[y * w + tx.index[ox * 4 + k]];
        rows[y * out_w + ox] = acc;
      }
    }
    float* dst = out.data() + static_cast<std::size_t>(pl) * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += ty.weight[oy * 4 + k] * rows[ty.index[oy * 4 + k] * out_w + ox];
        dst[oy * out_w + ox] = static_cast<float>(acc);
      }
    }
  }
  return Tensor(Shape{s[0], s[1], out_h, out_w}, std::move(out));
}

Tensor bicubic_resize(const Tensor& img, double scale) {
  expect_image_batch(img, "bicubic_resize");
  if (!(scale > 0.0)) throw ContractError("bicubic_resize: scale must be positive");
  const auto oh = static_cast<std::size_t>(std::llround(static_cast<double>(img.size(2)) * scale));
  const auto ow = static_cast<std::size_t>(std::llround(static_cast<double>(img.size(3)) * scale));
  return bicubic_resize(img, oh, ow);
}

}  // namespace kasr
