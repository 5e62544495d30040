#pragma once
// Brute-force reference implementations used to check the library. They work
// in double on plain arrays, share no code with the kernels, and favour
// obviousness over speed.

#include <cstddef>
#include <vector>

namespace kasr::oracle {

struct Image {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  double at(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const {
    return v[((b * c + ch) * h + y) * w + x];
  }
  double& at(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) { return v[((b * c + ch) * h + y) * w + x]; }
};

Image make_image(std::size_t n, std::size_t c, std::size_t h, std::size_t w);

/// Mirror index without repeating the edge sample: -1 -> 1, n -> n-2.
std::size_t mirror(long i, std::size_t n);

/// Cross-correlation, zero padding. weight is oc x ic x kh x kw, row-major.
Image conv2d(const Image& x, const std::vector<double>& weight, const std::vector<double>& bias, std::size_t oc,
             std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad);

Image maxpool(const Image& x, std::size_t window, std::size_t stride);

/// sqrt(gx^2 + gy^2 + 1e-12) with 3x3 Sobel correlation and mirror padding.
Image sobel(const Image& x);

/// Per image (x - min) / (max - min) over all channels; zeros when flat.
Image minmax(const Image& x);

/// Full-resolution true convolution with mirror padding, then every `scale`-th
/// sample from offset 0. kernel is kr x kc.
Image blur_subsample(const Image& x, const std::vector<double>& kernel, std::size_t kr, std::size_t kc,
                     std::size_t scale);

/// Catmull-Rom (a = -0.5), pixel centres at +0.5, edge clamp; 16 taps per
/// output evaluated directly in 2-D.
Image bicubic(const Image& x, std::size_t out_h, std::size_t out_w);

double psnr(const Image& a, const Image& b);

/// Mean SSIM over every valid 11x11 window (Gaussian sigma 1.5), per channel.
double ssim(const Image& a, const Image& b);

/// mean over elements of log(1 + exp(z)) - t*z, via log-sum-exp.
double bce_with_logits(const std::vector<double>& logits, double target);

}  // namespace kasr::oracle
