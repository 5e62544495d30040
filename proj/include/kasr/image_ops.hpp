#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "kasr/tensor.hpp"

namespace kasr {

/// Square-ish 2D filter stored row-major.
struct Kernel2D {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::vector<double> values{1.0};

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double sum() const;
  static Kernel2D delta(std::size_t size);
  static Kernel2D box(std::size_t size);
};

/// Classical degradation: blur with `kernel`, keep every `scale`-th pixel,
/// add Gaussian noise of std `noise_sigma`, clamp to [0,1].
struct DegradationSpec {
  Kernel2D kernel;
  std::size_t scale = 2;
  double noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;

  /// Throws ContractError on a non-normalized kernel or unsupported scale.
  void validate() const;
};

/// Normalized isotropic Gaussian; `size` must be odd.
Kernel2D gaussian_kernel(std::size_t size, double sigma);

/// Index into [0, n) under mirror padding without edge repetition.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

Tensor degrade_classical(const Tensor& hr, const DegradationSpec& spec);

/// Per-channel Sobel gradient magnitude sqrt(gx^2 + gy^2 + 1e-12), reflect
/// padded. Differentiable.
template <typename T>
BasicTensor<T> sobel_map(const BasicTensor<T>& img);

inline constexpr double kMinMaxDegenerate = 1e-12;

/// Per image (all channels jointly) (x - min) / (max - min); all zeros when
/// the range is below 1e-12. Differentiable, with subgradients to the first
/// extremal elements.
template <typename T>
BasicTensor<T> minmax_normalize(const BasicTensor<T>& map);

/// Catmull-Rom (a = -0.5) resampling, half-pixel centers, clamped edges.
Tensor bicubic_resize(const Tensor& img, std::size_t out_h, std::size_t out_w);
Tensor bicubic_resize(const Tensor& img, double scale);

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) over every element, data range 1; identical inputs give 100.
double psnr(const Tensor& a, const Tensor& b);

/// Mean SSIM over valid 11x11 Gaussian (sigma 1.5) windows, per channel then averaged.
double ssim(const Tensor& a, const Tensor& b);

/// Element of the dihedral group of the square: `rotations` quarter turns
/// (counter-clockwise) applied after an optional horizontal flip.
struct Dihedral {
  int rotations = 0;
  bool flip = false;

  static Dihedral from_index(int index) { return {index % 4, index >= 4}; }
  int index() const { return rotations + (flip ? 4 : 0); }
};

template <typename T>
BasicTensor<T> apply_dihedral(const BasicTensor<T>& img, Dihedral d);
template <typename T>
BasicTensor<T> invert_dihedral(const BasicTensor<T>& img, Dihedral d);

struct AugmentedPair {
  Tensor lr;
  Tensor hr;
  Dihedral transform;
};

/// Draws one of the 8 dihedral transforms uniformly and applies it to both images.
AugmentedPair augment_pair(const Tensor& lr, const Tensor& hr, std::mt19937_64& rng);

using ImageModel = std::function<Tensor(const Tensor&)>;

/// Runs `model` under all 8 dihedral transforms, undoes each, and averages.
Tensor self_ensemble(const ImageModel& model, const Tensor& lr);

}  // namespace kasr
