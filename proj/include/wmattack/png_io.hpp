#pragma once

#include <png.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wmattack/error.hpp"
#include "wmattack/image.hpp"

namespace wmattack {

namespace detail {

// png_image owns libpng state between begin_read and finish_read.
struct PngImageGuard {
  png_image image{};
  PngImageGuard() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImageGuard() { png_image_free(&image); }
  PngImageGuard(const PngImageGuard&) = delete;
  PngImageGuard& operator=(const PngImageGuard&) = delete;
};

}  // namespace detail

/// Reads an 8-bit RGB or RGBA PNG. Alpha is composited over opaque black.
/// Grayscale, palette and 16-bit files are rejected rather than converted.
inline RasterImage load_png(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::MissingFile, path.string());
  }
  detail::PngImageGuard guard;
  png_image& image = guard.image;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw Error(ErrorCode::MalformedPng, path.string() + ": " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    throw Error(ErrorCode::UnsupportedBitDepth, path.string() + ": 16-bit PNG");
  }
  if (!(image.format & PNG_FORMAT_FLAG_COLOR) || (image.format & PNG_FORMAT_FLAG_COLORMAP)) {
    throw Error(ErrorCode::UnsupportedColorType,
                path.string() + ": only RGB and RGBA PNGs are supported");
  }
  const int width = static_cast<int>(image.width);
  const int height = static_cast<int>(image.height);
  const bool has_alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  image.format = has_alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  const int channels = has_alpha ? 4 : 3;
  std::vector<std::uint8_t> buffer(static_cast<std::size_t>(width) * height * channels);
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    throw Error(ErrorCode::MalformedPng, path.string() + ": " + image.message);
  }
  if (!has_alpha) return RasterImage(width, height, std::move(buffer));

  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0, n = static_cast<std::size_t>(width) * height; i < n; ++i) {
    const unsigned alpha = buffer[4 * i + 3];
    for (int c = 0; c < 3; ++c) {
      rgb[3 * i + c] = static_cast<std::uint8_t>((buffer[4 * i + c] * alpha + 127) / 255);
    }
  }
  return RasterImage(width, height, std::move(rgb));
}

/// Writes a lossless 8-bit RGB PNG.
inline void save_png(const RasterImage& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  const bool ok = png_image_write_to_file(&image, path.string().c_str(), 0,
                                          img.pixels().data(), 0, nullptr) != 0;
  std::string message = image.message;
  png_image_free(&image);
  if (!ok) throw Error(ErrorCode::UnwritablePath, path.string() + ": " + message);
}

}  // namespace wmattack
