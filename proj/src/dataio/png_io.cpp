#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "kasr/dataio.hpp"
#include "kasr/ops.hpp"

namespace kasr {

std::uint8_t quantize_unit(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

Tensor load_png(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw IoError(IoError::Kind::Missing, "image not found: " + path.string());
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError(IoError::Kind::Malformed, "malformed PNG " + path.string() + ": " + image.message);
  }
  if (!(image.format & PNG_FORMAT_FLAG_COLOR) || (image.format & PNG_FORMAT_FLAG_ALPHA)) {
    png_image_free(&image);
    throw IoError(IoError::Kind::NotRgb, path.string() + " is not an RGB image");
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    throw IoError(IoError::Kind::Malformed, "malformed PNG " + path.string() + ": " + image.message);
  }
  const std::size_t h = image.height, w = image.width;
  std::vector<float> data(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        data[(c * h + y) * w + x] = static_cast<float>(buf[(y * w + x) * 3 + c]) / 255.0f;
      }
    }
  }
  return Tensor(Shape{1, 3, h, w}, std::move(data));
}

void save_png(const Tensor& img, const std::filesystem::path& path) {
  expect_image_batch(img, "save_png");
  if (img.size(0) != 1) throw DimensionError("save_png", "batch", "expected a single image, got " + shape_str(img.shape()));
  if (img.size(1) != 3) throw DimensionError("save_png", "channels", "expected 3 channels, got " + shape_str(img.shape()));
  const std::size_t h = img.size(2), w = img.size(3);
  std::vector<png_byte> buf(3 * h * w);
  const auto x = img.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t xx = 0; xx < w; ++xx) {
      for (std::size_t c = 0; c < 3; ++c) buf[(y * w + xx) * 3 + c] = quantize_unit(x[(c * h + y) * w + xx]);
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw IoError(IoError::Kind::Unwritable, "cannot write " + path.string() + ": " + image.message);
  }
}

}  // namespace kasr
