#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kasr/image_ops.hpp"
#include "kasr/tensor.hpp"

namespace kasr {

/// 8-bit RGB PNG to a 1x3xHxW tensor with values byte/255.
Tensor load_png(const std::filesystem::path& path);

/// Writes a 1x3xHxW tensor; values are clamped to [0,1] and rounded half-up.
void save_png(const Tensor& img, const std::filesystem::path& path);

std::uint8_t quantize_unit(float v);

struct ImagePair {
  std::string name;  // shared filename stem
  Tensor lr;
  Tensor hr;
};

/// `<root>/HR/<stem>.png` paired with `<root>/LR/<stem>.png`, sorted by stem.
class PairDataset {
 public:
  /// Infers the scale from the manifest when present, otherwise from the first pair.
  static PairDataset load(const std::filesystem::path& root, std::optional<std::size_t> scale = std::nullopt);

  const std::filesystem::path& root() const { return root_; }
  std::size_t scale() const { return scale_; }
  const std::vector<ImagePair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }

 private:
  std::filesystem::path root_;
  std::size_t scale_ = 1;
  std::vector<ImagePair> pairs_;
};

struct PatchPair {
  Tensor lr;
  Tensor hr;
  std::size_t x = 0;  // LR corner
  std::size_t y = 0;
};

/// Uniform random aligned crop: LR (x, y, patch) with HR (s*x, s*y, s*patch).
PatchPair extract_patches(const Tensor& lr, const Tensor& hr, std::size_t patch, std::size_t scale,
                          std::mt19937_64& rng);

/// Which original axes (height, width) a dihedral transform reverses.
std::pair<bool, bool> reversed_axes(Dihedral d);

/// Random crop plus a random dihedral transform of the pair. LR pixel j sits
/// over HR pixel scale*j; reversing an axis would move it to scale*j + scale-1,
/// so along reversed axes the HR window starts scale-1 pixels earlier. Transforms
/// that need a margin the image lacks are not drawn.
AugmentedPair sample_augmented_patch(const Tensor& lr, const Tensor& hr, std::size_t patch, std::size_t scale,
                                     std::mt19937_64& rng);

/// Contents of `<root>/manifest.json`.
struct DatasetManifest {
  DegradationSpec spec;  // rng_seed: base of the per-image noise seeds
  std::uint64_t seed = 0;  // base of the per-image content seeds
  double blur_sigma = 0.0;
  std::size_t n_images = 0;
  std::size_t hr_size = 0;
  double baseline_psnr = 0.0;
};

std::optional<DatasetManifest> read_manifest(const std::filesystem::path& root);

/// Gaussian kernel of width 2*ceil(3*sigma)+1, or a 1x1 delta for sigma = 0.
Kernel2D blur_kernel_for_sigma(double sigma);

/// Procedural HR image (gratings, rectangles, gradients), values quantized to bytes.
Tensor synth_image(std::size_t size, std::uint64_t seed);

/// Writes HR/LR pairs plus manifest.json; the LR images come from
/// degrade_classical applied to the quantized HR images.
DatasetManifest synth_dataset(std::size_t n_images, std::size_t hr_size, const DegradationSpec& spec,
                              std::uint64_t seed, const std::filesystem::path& out_dir, double blur_sigma = 0.0);

/// Decorrelated stream seed for (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace kasr
