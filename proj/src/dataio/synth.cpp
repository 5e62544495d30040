#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "kasr/dataio.hpp"

namespace kasr {

namespace fs = std::filesystem;

Kernel2D blur_kernel_for_sigma(double sigma) {
  if (sigma < 0.0) throw ContractError("blur sigma must be non-negative");
  if (sigma == 0.0) return Kernel2D::delta(1);
  const auto half = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  return gaussian_kernel(2 * half + 1, sigma);
}

Tensor synth_image(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double n = static_cast<double>(size);
  std::vector<double> img(3 * size * size);

  // Smooth background gradient.
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = uni(0.25, 0.75), gx = uni(-0.3, 0.3), gy = uni(-0.3, 0.3);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        img[(c * size + y) * size + x] =
            base + gx * (static_cast<double>(x) / n - 0.5) + gy * (static_cast<double>(y) / n - 0.5);
      }
    }
  }

  // Oriented gratings under Gaussian envelopes, so flat regions remain elsewhere.
  const int gratings = 1 + static_cast<int>(rng() % 2);
  for (int g = 0; g < gratings; ++g) {
    const double freq = uni(0.04, 0.25), theta = uni(0.0, std::numbers::pi), phase = uni(0.0, 2 * std::numbers::pi);
    const double amp = uni(0.1, 0.25);
    const double cx = uni(0.2, 0.8) * n, cy = uni(0.2, 0.8) * n, radius = uni(0.15, 0.35) * n;
    double tint[3];
    for (double& t : tint) t = uni(0.4, 1.0);
    const double kx = std::cos(theta) * 2 * std::numbers::pi * freq;
    const double ky = std::sin(theta) * 2 * std::numbers::pi * freq;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        const double env = std::exp(-(dx * dx + dy * dy) / (2 * radius * radius));
        const double wave = amp * env * std::sin(kx * static_cast<double>(x) + ky * static_cast<double>(y) + phase);
        for (std::size_t c = 0; c < 3; ++c) img[(c * size + y) * size + x] += tint[c] * wave;
      }
    }
  }

  // Opaque rectangles with hard edges.
  const int rects = 2 + static_cast<int>(rng() % 3);
  for (int r = 0; r < rects; ++r) {
    const auto w = static_cast<std::size_t>(uni(0.1, 0.4) * n) + 1;
    const auto h = static_cast<std::size_t>(uni(0.1, 0.4) * n) + 1;
    const auto x0 = static_cast<std::size_t>(uni(0.0, 1.0) * static_cast<double>(size - std::min(w, size)));
    const auto y0 = static_cast<std::size_t>(uni(0.0, 1.0) * static_cast<double>(size - std::min(h, size)));
    double color[3];
    for (double& c : color) c = uni(0.0, 1.0);
    for (std::size_t y = y0; y < std::min(size, y0 + h); ++y) {
      for (std::size_t x = x0; x < std::min(size, x0 + w); ++x) {
        for (std::size_t c = 0; c < 3; ++c) img[(c * size + y) * size + x] = color[c];
      }
    }
  }

  std::vector<float> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = static_cast<float>(quantize_unit(static_cast<float>(img[i]))) / 255.0f;
  }
  return Tensor(Shape{1, 3, size, size}, std::move(out));
}

DatasetManifest synth_dataset(std::size_t n_images, std::size_t hr_size, const DegradationSpec& spec,
                              std::uint64_t seed, const fs::path& out_dir, double blur_sigma) {
  spec.validate();
  if (hr_size == 0 || hr_size % spec.scale != 0) {
    throw ContractError("synth_dataset: hr_size " + std::to_string(hr_size) + " must be divisible by scale " +
                        std::to_string(spec.scale));
  }
  try {
    fs::create_directories(out_dir / "HR");
    fs::create_directories(out_dir / "LR");
  } catch (const fs::filesystem_error& e) {
    throw IoError(IoError::Kind::Unwritable, std::string("cannot create dataset directory: ") + e.what());
  }

  double psnr_sum = 0.0;
  for (std::size_t i = 0; i < n_images; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "img_%04zu", i);
    const Tensor hr = synth_image(hr_size, derive_seed(seed, i));
    DegradationSpec per_image = spec;
    per_image.rng_seed = derive_seed(spec.rng_seed, i);
    const Tensor lr = degrade_classical(hr, per_image);
    const fs::path hr_path = out_dir / "HR" / (std::string(stem) + ".png");
    const fs::path lr_path = out_dir / "LR" / (std::string(stem) + ".png");
    save_png(hr, hr_path);
    save_png(lr, lr_path);
    const Tensor lr_q = load_png(lr_path);
    psnr_sum += psnr(bicubic_resize(lr_q, hr_size, hr_size), hr);
  }

  DatasetManifest m;
  m.spec = spec;
  m.seed = seed;
  m.blur_sigma = blur_sigma;
  m.n_images = n_images;
  m.hr_size = hr_size;
  m.baseline_psnr = n_images ? psnr_sum / static_cast<double>(n_images) : 0.0;

  nlohmann::json kernel = nlohmann::json::array();
  for (std::size_t r = 0; r < spec.kernel.rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < spec.kernel.cols; ++c) row.push_back(spec.kernel.at(r, c));
    kernel.push_back(row);
  }
  const nlohmann::json j = {{"scale", spec.scale},       {"kernel", kernel},
                            {"noise_sigma", spec.noise_sigma}, {"seed", seed},
                            {"noise_seed", spec.rng_seed}, {"blur_sigma", blur_sigma},
                            {"n_images", n_images},        {"hr_size", hr_size},
                            {"baseline_psnr", m.baseline_psnr}};
  std::ofstream f(out_dir / "manifest.json");
  if (!f) throw IoError(IoError::Kind::Unwritable, "cannot write manifest in " + out_dir.string());
  f << j.dump(2) << '\n';
  return m;
}

}  // namespace kasr
