#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "wmattack/dct.hpp"
#include "wmattack/error.hpp"
#include "wmattack/image.hpp"
#include "wmattack/rng.hpp"

namespace wmattack {

enum class DistortionKind {
  CenterCrop,
  ResizeCycle,
  DctQuantize,
  Brightness,
  Contrast,
  GaussianNoise,
  GaussianBlur,
};

inline constexpr std::array<std::pair<DistortionKind, std::string_view>, 7> kDistortionNames = {{
    {DistortionKind::CenterCrop, "center_crop"},
    {DistortionKind::ResizeCycle, "resize_cycle"},
    {DistortionKind::DctQuantize, "dct_quantize"},
    {DistortionKind::Brightness, "brightness"},
    {DistortionKind::Contrast, "contrast"},
    {DistortionKind::GaussianNoise, "gaussian_noise"},
    {DistortionKind::GaussianBlur, "gaussian_blur"},
}};

inline std::string_view distortion_name(DistortionKind kind) {
  for (const auto& [k, name] : kDistortionNames)
    if (k == kind) return name;
  return "unknown";
}

/// One image manipulation with its single severity parameter. Severity grows
/// with: smaller crop fraction, smaller resize scale, lower quality,
/// larger |brightness|, larger |contrast - 1|, larger noise sigma, larger
/// blur sigma. `seed` is used only by gaussian_noise.
struct Distortion {
  DistortionKind kind = DistortionKind::Brightness;
  double param = 0.0;
  std::uint64_t seed = 0;

  static Distortion center_crop(double fraction) { return {DistortionKind::CenterCrop, fraction}; }
  static Distortion resize_cycle(double scale) { return {DistortionKind::ResizeCycle, scale}; }
  static Distortion dct_quantize(double quality) { return {DistortionKind::DctQuantize, quality}; }
  static Distortion brightness(double offset) { return {DistortionKind::Brightness, offset}; }
  static Distortion contrast(double gain) { return {DistortionKind::Contrast, gain}; }
  static Distortion gaussian_noise(double sigma, std::uint64_t seed) {
    return {DistortionKind::GaussianNoise, sigma, seed};
  }
  static Distortion gaussian_blur(double sigma) { return {DistortionKind::GaussianBlur, sigma}; }

  void validate() const {
    auto fail = [this](const char* range) {
      throw Error(ErrorCode::InvalidArgument, std::string(distortion_name(kind)) +
                                                  " parameter out of range " + range);
    };
    if (!std::isfinite(param)) fail("(not finite)");
    switch (kind) {
      case DistortionKind::CenterCrop:
        if (!(param > 0.0 && param <= 1.0)) fail("(0, 1]");
        break;
      case DistortionKind::ResizeCycle:
        if (!(param > 0.0 && param <= 1.0)) fail("(0, 1]");
        break;
      case DistortionKind::DctQuantize:
        if (!(param >= 1.0 && param <= 100.0)) fail("[1, 100]");
        break;
      case DistortionKind::Brightness:
        if (!(param >= -64.0 && param <= 64.0)) fail("[-64, 64]");
        break;
      case DistortionKind::Contrast:
        if (!(param >= 0.5 && param <= 2.0)) fail("[0.5, 2]");
        break;
      case DistortionKind::GaussianNoise:
      case DistortionKind::GaussianBlur:
        if (!(param >= 0.0)) fail("[0, inf)");
        break;
    }
  }

  /// Canonical `kind:param[:seed]` atom.
  std::string to_string() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", param);
    std::string out = std::string(distortion_name(kind)) + ":" + buf;
    if (kind == DistortionKind::GaussianNoise) out += ":" + std::to_string(seed);
    return out;
  }

  friend bool operator==(const Distortion&, const Distortion&) = default;
};

namespace detail {

inline double parse_real(std::string_view text, std::string_view atom) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad number in distortion '" + std::string(atom) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace detail

/// Parses one `kind:param[:seed]` atom. The seed field is accepted only for
/// gaussian_noise and defaults to 0.
inline Distortion parse_distortion(std::string_view atom) {
  const auto parts = detail::split(atom, ':');
  if (parts.size() < 2 || parts.size() > 3) {
    throw Error(ErrorCode::InvalidArgument, "distortion must be kind:param[:seed], got '" +
                                                std::string(atom) + "'");
  }
  Distortion d;
  bool known = false;
  for (const auto& [kind, name] : kDistortionNames) {
    if (parts[0] == name) {
      d.kind = kind;
      known = true;
    }
  }
  if (!known) throw Error(ErrorCode::InvalidArgument, "unknown distortion kind '" + std::string(parts[0]) + "'");
  d.param = detail::parse_real(parts[1], atom);
  if (parts.size() == 3) {
    if (d.kind != DistortionKind::GaussianNoise) {
      throw Error(ErrorCode::InvalidArgument, "only gaussian_noise takes a seed: '" + std::string(atom) + "'");
    }
    const auto [end, ec] = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), d.seed);
    if (ec != std::errc() || end != parts[2].data() + parts[2].size()) {
      throw Error(ErrorCode::InvalidArgument, "bad seed in distortion '" + std::string(atom) + "'");
    }
  }
  d.validate();
  return d;
}

/// Comma-separated chain of atoms; an empty string is the empty chain.
inline std::vector<Distortion> parse_chain(std::string_view text) {
  std::vector<Distortion> chain;
  if (text.empty()) return chain;
  for (auto atom : detail::split(text, ',')) chain.push_back(parse_distortion(atom));
  return chain;
}

inline std::string chain_to_string(const std::vector<Distortion>& chain) {
  std::string out;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (i) out += ",";
    out += chain[i].to_string();
  }
  return out;
}

namespace detail {

// Mirror-with-edge-repeat index into [lo, lo + len).
inline int reflect_index(int i, int lo, int len) {
  if (len == 1) return lo;
  const int period = 2 * len;
  int r = (i - lo) % period;
  if (r < 0) r += period;
  return lo + (r < len ? r : period - 1 - r);
}

inline RasterImage center_crop(const RasterImage& img, double fraction) {
  if (fraction == 1.0) return img;
  const int w = img.width();
  const int h = img.height();
  const int kw = std::max(1, static_cast<int>(std::lround(fraction * w)));
  const int kh = std::max(1, static_cast<int>(std::lround(fraction * h)));
  const int x0 = (w - kw) / 2;
  const int y0 = (h - kh) / 2;
  RasterImage out = img;
  for (int y = 0; y < h; ++y) {
    const int sy = reflect_index(y, y0, kh);
    for (int x = 0; x < w; ++x) {
      const int sx = reflect_index(x, x0, kw);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

// Bilinear resampling with pixel-center alignment, clamped at the borders.
inline std::vector<double> resample(const std::vector<double>& src, int sw, int sh, int dw, int dh) {
  std::vector<double> dst(static_cast<std::size_t>(dw) * dh * 3);
  const double fx = static_cast<double>(sw) / dw;
  const double fy = static_cast<double>(sh) / dh;
  for (int y = 0; y < dh; ++y) {
    const double sy = std::clamp((y + 0.5) * fy - 0.5, 0.0, static_cast<double>(sh - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double wy = sy - y0;
    for (int x = 0; x < dw; ++x) {
      const double sx = std::clamp((x + 0.5) * fx - 0.5, 0.0, static_cast<double>(sw - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double wx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        auto px = [&](int xx, int yy) { return src[(static_cast<std::size_t>(yy) * sw + xx) * 3 + c]; };
        const double top = px(x0, y0) * (1 - wx) + px(x1, y0) * wx;
        const double bottom = px(x0, y1) * (1 - wx) + px(x1, y1) * wx;
        dst[(static_cast<std::size_t>(y) * dw + x) * 3 + c] = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return dst;
}

inline RasterImage resize_cycle(const RasterImage& img, double scale) {
  const int w = img.width();
  const int h = img.height();
  const int sw = std::max(1, static_cast<int>(std::lround(scale * w)));
  const int sh = std::max(1, static_cast<int>(std::lround(scale * h)));
  if (sw == w && sh == h) return img;
  std::vector<double> src(img.pixels().begin(), img.pixels().end());
  const auto small = resample(src, w, h, sw, sh);
  const auto back = resample(small, sw, sh, w, h);
  RasterImage out = img;
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = clamp_u8(back[i]);
  return out;
}

// IJG base tables in row-major order.
inline constexpr std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
inline constexpr std::array<int, 64> kChrominanceTable = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

/// IJG quality scaling: 5000/q below 50, 200 - 2q from 50 up; entries clamp to [1, 255].
inline std::array<int, 64> scaled_table(const std::array<int, 64>& base, int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> out{};
  for (int i = 0; i < 64; ++i) out[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return out;
}

// Quantizes one plane in place; partial edge blocks are edge-extended.
inline void quantize_plane(std::vector<double>& plane, int w, int h, const std::array<int, 64>& table) {
  using dct::kBlock;
  for (int by = 0; by < h; by += kBlock)
    for (int bx = 0; bx < w; bx += kBlock) {
      dct::Block block{};
      for (int y = 0; y < kBlock; ++y)
        for (int x = 0; x < kBlock; ++x) {
          const int sx = std::min(bx + x, w - 1);
          const int sy = std::min(by + y, h - 1);
          block[y * kBlock + x] = plane[static_cast<std::size_t>(sy) * w + sx] - 128.0;
        }
      dct::Block coeffs = dct::forward(block);
      for (int i = 0; i < 64; ++i) coeffs[i] = std::round(coeffs[i] / table[i]) * table[i];
      const dct::Block spatial = dct::inverse(coeffs);
      for (int y = 0; y < kBlock && by + y < h; ++y)
        for (int x = 0; x < kBlock && bx + x < w; ++x)
          plane[static_cast<std::size_t>(by + y) * w + bx + x] = spatial[y * kBlock + x] + 128.0;
    }
}

/// In-memory JPEG-style compression artifact: full-range YCbCr, 8x8 DCT,
/// IJG-scaled quantization, back to RGB. Quality 100 is a passthrough.
inline RasterImage dct_quantize(const RasterImage& img, double quality) {
  const int q = static_cast<int>(std::lround(quality));
  if (q >= 100) return img;
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = img.pixel_count();
  std::vector<double> yp(n), cb(n), cr(n);
  auto px = img.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = px[3 * i], g = px[3 * i + 1], b = px[3 * i + 2];
    yp[i] = 0.299 * r + 0.587 * g + 0.114 * b;
    cb[i] = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    cr[i] = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
  }
  quantize_plane(yp, w, h, scaled_table(kLuminanceTable, q));
  const auto chroma = scaled_table(kChrominanceTable, q);
  quantize_plane(cb, w, h, chroma);
  quantize_plane(cr, w, h, chroma);
  RasterImage out = img;
  auto po = out.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    po[3 * i] = clamp_u8(yp[i] + 1.402 * (cr[i] - 128.0));
    po[3 * i + 1] = clamp_u8(yp[i] - 0.344136 * (cb[i] - 128.0) - 0.714136 * (cr[i] - 128.0));
    po[3 * i + 2] = clamp_u8(yp[i] + 1.772 * (cb[i] - 128.0));
  }
  return out;
}

inline RasterImage gaussian_blur(const RasterImage& img, double sigma) {
  if (sigma == 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    sum += taps[k + radius];
  }
  for (auto& t : taps) t /= sum;
  const int w = img.width();
  const int h = img.height();
  std::vector<double> rows(img.pixel_count() * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k) s += taps[k + radius] * img.at(reflect_index(x + k, 0, w), y, c);
        rows[(static_cast<std::size_t>(y) * w + x) * 3 + c] = s;
      }
  RasterImage out = img;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k)
          s += taps[k + radius] * rows[(static_cast<std::size_t>(reflect_index(y + k, 0, h)) * w + x) * 3 + c];
        out.at(x, y, c) = clamp_u8(s);
      }
  return out;
}

template <typename F>
RasterImage map_samples(const RasterImage& img, F&& f) {
  RasterImage out = img;
  for (auto& v : out.pixels()) v = clamp_u8(f(static_cast<double>(v)));
  return out;
}

}  // namespace detail

/// Applies one distortion. Output dimensions always equal the input's.
inline RasterImage apply(const Distortion& d, const RasterImage& img) {
  d.validate();
  switch (d.kind) {
    case DistortionKind::CenterCrop:
      return detail::center_crop(img, d.param);
    case DistortionKind::ResizeCycle:
      return detail::resize_cycle(img, d.param);
    case DistortionKind::DctQuantize:
      return detail::dct_quantize(img, d.param);
    case DistortionKind::Brightness:
      return detail::map_samples(img, [b = d.param](double v) { return v + b; });
    case DistortionKind::Contrast:
      return detail::map_samples(img, [g = d.param](double v) { return 128.0 + g * (v - 128.0); });
    case DistortionKind::GaussianNoise: {
      if (d.param == 0.0) return img;
      SplitMix64 rng(d.seed);
      return detail::map_samples(img, [&rng, s = d.param](double v) { return v + s * rng.gaussian(); });
    }
    case DistortionKind::GaussianBlur:
      return detail::gaussian_blur(img, d.param);
  }
  return img;
}

inline RasterImage compose(const std::vector<Distortion>& chain, const RasterImage& img) {
  RasterImage out = img;
  for (const auto& d : chain) out = apply(d, out);
  return out;
}

}  // namespace wmattack
