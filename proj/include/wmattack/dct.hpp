#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace wmattack::dct {

inline constexpr int kBlock = 8;
using Block = std::array<double, kBlock * kBlock>;

// Zig-zag scan order: entry k is the row-major index of the k-th coefficient.
inline constexpr std::array<int, 64> kZigZag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

// Orthonormal DCT-II basis: basis[u][x] = c(u) cos((2x + 1) u pi / 16).
inline const std::array<std::array<double, kBlock>, kBlock>& basis() {
  static const auto table = [] {
    std::array<std::array<double, kBlock>, kBlock> t{};
    for (int u = 0; u < kBlock; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int x = 0; x < kBlock; ++x) {
        t[u][x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / (2 * kBlock));
      }
    }
    return t;
  }();
  return table;
}

/// Separable orthonormal 2-D forward transform (row-major in, row-major out).
inline Block forward(const Block& in) {
  const auto& b = basis();
  Block tmp{};
  for (int y = 0; y < kBlock; ++y)
    for (int u = 0; u < kBlock; ++u) {
      double s = 0.0;
      for (int x = 0; x < kBlock; ++x) s += b[u][x] * in[y * kBlock + x];
      tmp[y * kBlock + u] = s;
    }
  Block out{};
  for (int v = 0; v < kBlock; ++v)
    for (int u = 0; u < kBlock; ++u) {
      double s = 0.0;
      for (int y = 0; y < kBlock; ++y) s += b[v][y] * tmp[y * kBlock + u];
      out[v * kBlock + u] = s;
    }
  return out;
}

inline Block inverse(const Block& in) {
  const auto& b = basis();
  Block tmp{};
  for (int v = 0; v < kBlock; ++v)
    for (int x = 0; x < kBlock; ++x) {
      double s = 0.0;
      for (int u = 0; u < kBlock; ++u) s += b[u][x] * in[v * kBlock + u];
      tmp[v * kBlock + x] = s;
    }
  Block out{};
  for (int y = 0; y < kBlock; ++y)
    for (int x = 0; x < kBlock; ++x) {
      double s = 0.0;
      for (int v = 0; v < kBlock; ++v) s += b[v][y] * tmp[v * kBlock + x];
      out[y * kBlock + x] = s;
    }
  return out;
}

}  // namespace wmattack::dct
