#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "kasr/dataio.hpp"
#include "kasr/ops.hpp"

namespace kasr {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(seed ^ mix(stream));
}

std::optional<DatasetManifest> read_manifest(const fs::path& root) {
  const fs::path p = root / "manifest.json";
  if (!fs::is_regular_file(p)) return std::nullopt;
  std::ifstream f(p);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
    DatasetManifest m;
    m.spec.scale = j.at("scale").get<std::size_t>();
    m.spec.noise_sigma = j.at("noise_sigma").get<double>();
    m.spec.rng_seed = j.contains("noise_seed") ? j.at("noise_seed").get<std::uint64_t>() : j.at("seed").get<std::uint64_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& k = j.at("kernel");
    m.spec.kernel.rows = k.size();
    m.spec.kernel.cols = k.at(0).size();
    m.spec.kernel.values.clear();
    for (const auto& row : k) {
      for (const auto& v : row) m.spec.kernel.values.push_back(v.get<double>());
    }
    m.blur_sigma = j.value("blur_sigma", 0.0);
    m.n_images = j.value("n_images", std::size_t{0});
    m.hr_size = j.value("hr_size", std::size_t{0});
    m.baseline_psnr = j.at("baseline_psnr").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoError::Kind::Malformed, "bad manifest " + p.string() + ": " + e.what());
  }
}

PairDataset PairDataset::load(const fs::path& root, std::optional<std::size_t> scale) {
  const fs::path hr_dir = root / "HR";
  const fs::path lr_dir = root / "LR";
  if (!fs::is_directory(hr_dir) || !fs::is_directory(lr_dir)) {
    throw IoError(IoError::Kind::Missing, root.string() + " must contain HR/ and LR/ directories");
  }
  if (!scale) {
    if (auto m = read_manifest(root)) scale = m->spec.scale;
  }
  std::map<std::string, fs::path> hr_files;
  for (const auto& e : fs::directory_iterator(hr_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") hr_files[e.path().stem().string()] = e.path();
  }
  PairDataset ds;
  ds.root_ = root;
  for (const auto& [stem, hr_path] : hr_files) {
    const fs::path lr_path = lr_dir / (stem + ".png");
    if (!fs::is_regular_file(lr_path)) {
      throw IoError(IoError::Kind::Missing, "pair '" + stem + "': no LR image " + lr_path.string());
    }
    ImagePair pair{stem, load_png(lr_path), load_png(hr_path)};
    const std::size_t lh = pair.lr.size(2), lw = pair.lr.size(3);
    const std::size_t hh = pair.hr.size(2), hw = pair.hr.size(3);
    if (!scale) scale = lh ? hh / lh : 0;
    if (*scale == 0 || hh != lh * *scale || hw != lw * *scale) {
      throw IoError(IoError::Kind::PairMismatch,
                    "pair '" + stem + "': HR " + std::to_string(hh) + "x" + std::to_string(hw) + " is not LR " +
                        std::to_string(lh) + "x" + std::to_string(lw) + " times scale " +
                        std::to_string(scale.value_or(0)));
    }
    ds.pairs_.push_back(std::move(pair));
  }
  ds.scale_ = scale.value_or(1);
  return ds;
}

namespace {
Tensor crop(const Tensor& img, std::size_t y0, std::size_t x0, std::size_t size) {
  const std::size_t c = img.size(1), h = img.size(2), w = img.size(3);
  std::vector<float> out(c * size * size);
  const auto src = img.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < size; ++y) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((ch * h + y0 + y) * w + x0), size,
                  out.begin() + static_cast<std::ptrdiff_t>((ch * size + y) * size));
    }
  }
  return Tensor(Shape{1, c, size, size}, std::move(out));
}
}  // namespace

PatchPair extract_patches(const Tensor& lr, const Tensor& hr, std::size_t patch, std::size_t scale,
                          std::mt19937_64& rng) {
  expect_image_batch(lr, "extract_patches");
  expect_image_batch(hr, "extract_patches");
  if (patch == 0 || scale == 0) throw ContractError("extract_patches: patch and scale must be positive");
  if (lr.size(0) != 1 || hr.size(0) != 1) throw ContractError("extract_patches: expects single images");
  if (lr.size(2) < patch || lr.size(3) < patch) {
    throw ContractError("extract_patches: LR image " + shape_str(lr.shape()) + " smaller than patch " +
                        std::to_string(patch));
  }
  if (hr.size(2) < patch * scale || hr.size(3) < patch * scale) {
    throw ContractError("extract_patches: HR image " + shape_str(hr.shape()) + " smaller than patch " +
                        std::to_string(patch * scale));
  }
  std::uniform_int_distribution<std::size_t> py(0, lr.size(2) - patch);
  std::uniform_int_distribution<std::size_t> px(0, lr.size(3) - patch);
  const std::size_t y = py(rng);
  const std::size_t x = px(rng);
  return {crop(lr, y, x, patch), crop(hr, y * scale, x * scale, patch * scale), x, y};
}

std::pair<bool, bool> reversed_axes(Dihedral d) {
  // Track where the origin and its two neighbours land.
  const Tensor probe(Shape{1, 1, 2, 2}, {0.0f, 1.0f, 2.0f, 3.0f});
  const Tensor t = apply_dihedral(probe, d);
  std::size_t pos[4];
  for (std::size_t i = 0; i < 4; ++i) pos[static_cast<std::size_t>(t.data()[i])] = i;
  const auto reversed = [&](std::size_t along) {
    const std::size_t a = pos[0], b = pos[along];
    return a / 2 == b / 2 ? b % 2 < a % 2 : b / 2 < a / 2;
  };
  return {reversed(2), reversed(1)};
}

AugmentedPair sample_augmented_patch(const Tensor& lr, const Tensor& hr, std::size_t patch, std::size_t scale,
                                     std::mt19937_64& rng) {
  expect_image_batch(lr, "sample_augmented_patch");
  expect_image_batch(hr, "sample_augmented_patch");
  if (patch == 0 || scale == 0) throw ContractError("sample_augmented_patch: patch and scale must be positive");
  const std::size_t lh = lr.size(2), lw = lr.size(3);
  if (lh < patch || lw < patch || hr.size(2) < lh * scale || hr.size(3) < lw * scale) {
    throw ContractError("sample_augmented_patch: images " + shape_str(lr.shape()) + " / " + shape_str(hr.shape()) +
                        " too small for patch " + std::to_string(patch) + " at scale " + std::to_string(scale));
  }
  const std::size_t shift = scale - 1;
  std::vector<Dihedral> options;
  for (int i = 0; i < 8; ++i) {
    const Dihedral d = Dihedral::from_index(i);
    const auto [rh, rw] = reversed_axes(d);
    if (shift > 0 && ((rh && lh == patch) || (rw && lw == patch))) continue;
    options.push_back(d);
  }
  const Dihedral d = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
  const auto [rh, rw] = reversed_axes(d);
  const std::size_t y_lo = rh && shift > 0 ? 1 : 0, x_lo = rw && shift > 0 ? 1 : 0;
  const std::size_t y = std::uniform_int_distribution<std::size_t>(y_lo, lh - patch)(rng);
  const std::size_t x = std::uniform_int_distribution<std::size_t>(x_lo, lw - patch)(rng);
  const std::size_t hy = y * scale - (rh ? shift : 0), hx = x * scale - (rw ? shift : 0);
  // crop() is square; take the HR window directly.
  const std::size_t hp = patch * scale, c = hr.size(1), H = hr.size(2), W = hr.size(3);
  std::vector<float> out(c * hp * hp);
  const auto src = hr.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t r = 0; r < hp; ++r) {
      const float* row = src.data() + (ch * H + hy + r) * W + hx;
      std::copy(row, row + hp, out.begin() + static_cast<std::ptrdiff_t>((ch * hp + r) * hp));
    }
  }
  const Tensor hr_patch(Shape{1, c, hp, hp}, std::move(out));
  return {apply_dihedral(crop(lr, y, x, patch), d), apply_dihedral(hr_patch, d), d};
}

}  // namespace kasr
