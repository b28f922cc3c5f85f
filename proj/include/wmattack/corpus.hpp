#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "wmattack/image.hpp"
#include "wmattack/rng.hpp"

namespace wmattack {

/// Deterministic random scene: a tinted base color plus low-frequency
/// cosine fields, soft blobs, hard-edged rectangles and mild sensor noise.
/// Stands in for a photographic corpus in tests and demos.
inline RasterImage synthetic_image(int width, int height, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, "synthetic-image"));
  auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

  std::vector<double> field(static_cast<std::size_t>(width) * height, 0.0);
  auto add = [&](auto&& f) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) field[static_cast<std::size_t>(y) * width + x] += f(x, y);
  };

  for (int k = 0; k < 4; ++k) {
    const double amp = uniform(4.0, 16.0);
    const double fx = uniform(-3.0, 3.0) / width;
    const double fy = uniform(-3.0, 3.0) / height;
    const double phase = uniform(0.0, 2.0 * std::numbers::pi);
    add([=](int x, int y) { return amp * std::cos(2.0 * std::numbers::pi * (fx * x + fy * y) + phase); });
  }
  for (int k = 0; k < 3; ++k) {
    const double amp = uniform(-30.0, 30.0);
    const double cx = uniform(0.0, width);
    const double cy = uniform(0.0, height);
    const double s = uniform(0.05, 0.2) * width;
    add([=](int x, int y) {
      const double dx = x - cx, dy = y - cy;
      return amp * std::exp(-(dx * dx + dy * dy) / (2.0 * s * s));
    });
  }
  for (int k = 0; k < 2; ++k) {
    const double amp = uniform(-20.0, 20.0);
    const int x0 = static_cast<int>(uniform(0.0, width * 0.7));
    const int y0 = static_cast<int>(uniform(0.0, height * 0.7));
    const int x1 = x0 + static_cast<int>(uniform(width * 0.1, width * 0.3));
    const int y1 = y0 + static_cast<int>(uniform(height * 0.1, height * 0.3));
    add([=](int x, int y) { return (x >= x0 && x < x1 && y >= y0 && y < y1) ? amp : 0.0; });
  }

  const double base[3] = {uniform(80.0, 170.0), uniform(80.0, 170.0), uniform(80.0, 170.0)};
  const double tint[3] = {uniform(0.8, 1.2), uniform(0.8, 1.2), uniform(0.8, 1.2)};
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < field.size(); ++i)
    for (int c = 0; c < 3; ++c)
      px[3 * i + c] = clamp_u8(base[c] + tint[c] * field[i] + 1.5 * rng.gaussian());
  return RasterImage(width, height, std::move(px));
}

}  // namespace wmattack
