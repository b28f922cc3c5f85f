#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "wmattack/error.hpp"

namespace wmattack {

inline constexpr int kMinImageSide = 16;

// BT.601 luma weights.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

/// Row-major interleaved 8-bit RGB image. Sides are at least 16 pixels.
class RasterImage {
 public:
  // Constrained so a braced {r, g, b} always selects the fill constructor.
  template <typename Pixels>
    requires std::same_as<std::remove_cvref_t<Pixels>, std::vector<std::uint8_t>>
  RasterImage(int width, int height, Pixels&& pixels)
      : width_(width), height_(height), pixels_(std::forward<Pixels>(pixels)) {
    if (width < kMinImageSide || height < kMinImageSide) {
      throw Error(ErrorCode::InvalidImage,
                  "image must be at least 16x16, got " + std::to_string(width) +
                      "x" + std::to_string(height));
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * height * 3) {
      throw Error(ErrorCode::InvalidImage, "pixel buffer size does not match dimensions");
    }
  }

  RasterImage(int width, int height, std::array<std::uint8_t, 3> fill)
      : RasterImage(width, height, filled(width, height, fill)) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  std::uint8_t at(int x, int y, int channel) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + channel];
  }
  std::uint8_t& at(int x, int y, int channel) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + channel];
  }

  bool same_shape(const RasterImage& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  static std::vector<std::uint8_t> filled(int width, int height,
                                          std::array<std::uint8_t, 3> fill) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(std::max(width, 0)) *
                                 std::max(height, 0) * 3);
    for (std::size_t i = 0; i < px.size(); i += 3) {
      px[i] = fill[0];
      px[i + 1] = fill[1];
      px[i + 2] = fill[2];
    }
    return px;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

/// Real-valued single-channel plane, nominally in [0, 255].
struct LumaPlane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

inline void require_same_shape(const RasterImage& a, const RasterImage& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()));
  }
}

inline double luma_of(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return kLumaR * r + kLumaG * g + kLumaB * b;
}

inline LumaPlane to_luma(const RasterImage& img) {
  LumaPlane plane{img.width(), img.height(), std::vector<double>(img.pixel_count())};
  auto px = img.pixels();
  for (std::size_t i = 0; i < plane.values.size(); ++i) {
    plane.values[i] = luma_of(px[3 * i], px[3 * i + 1], px[3 * i + 2]);
  }
  return plane;
}

/// Shifts every channel of each pixel by (new luma - old luma) and clamps.
/// Chroma differences between channels are carried over unchanged except
/// where a channel saturates.
inline RasterImage merge_luma(const RasterImage& img, const LumaPlane& luma) {
  if (luma.width != img.width() || luma.height != img.height() ||
      luma.values.size() != img.pixel_count()) {
    throw Error(ErrorCode::DimensionMismatch, "merge_luma: luma plane does not match image");
  }
  RasterImage out = img;
  auto px = out.pixels();
  for (std::size_t i = 0; i < luma.values.size(); ++i) {
    const double shift = luma.values[i] - luma_of(px[3 * i], px[3 * i + 1], px[3 * i + 2]);
    if (shift == 0.0) continue;
    for (int c = 0; c < 3; ++c) px[3 * i + c] = clamp_u8(px[3 * i + c] + shift);
  }
  return out;
}

/// Amplified difference centered on mid-gray: clamp(128 + gain * (a - b)).
inline RasterImage diff_image(const RasterImage& a, const RasterImage& b, double gain) {
  require_same_shape(a, b, "diff_image");
  if (!(gain > 0.0) || !std::isfinite(gain)) {
    throw Error(ErrorCode::InvalidArgument, "diff gain must be positive and finite");
  }
  RasterImage out = a;
  auto pa = a.pixels();
  auto pb = b.pixels();
  auto po = out.pixels();
  for (std::size_t i = 0; i < po.size(); ++i) {
    po[i] = clamp_u8(128.0 + gain * (static_cast<double>(pa[i]) - pb[i]));
  }
  return out;
}

}  // namespace wmattack
