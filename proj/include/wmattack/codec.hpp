#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmattack/dct.hpp"
#include "wmattack/error.hpp"
#include "wmattack/image.hpp"
#include "wmattack/rng.hpp"

namespace wmattack {

/// Fixed-length bit string carried by the watermark. Elements are 0 or 1.
class Payload {
 public:
  Payload() = default;
  explicit Payload(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_) {
      if (b > 1) throw Error(ErrorCode::InvalidArgument, "payload bits must be 0 or 1");
    }
  }

  static Payload zeros(std::size_t n) { return Payload(std::vector<std::uint8_t>(n, 0)); }

  static Payload random(std::size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<std::uint8_t> bits(n);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next() >> 63);
    return Payload(std::move(bits));
  }

  /// Parses lowercase or uppercase hex, n bits MSB-first, padded to whole bytes.
  /// Padding bits must be zero.
  static Payload from_hex(std::string_view hex, std::size_t n) {
    const std::size_t bytes = (n + 7) / 8;
    if (hex.size() != 2 * bytes) {
      throw Error(ErrorCode::InvalidArgument, "payload hex must have " +
                                                  std::to_string(2 * bytes) + " digits for " +
                                                  std::to_string(n) + " bits");
    }
    std::vector<std::uint8_t> bits(bytes * 8);
    for (std::size_t i = 0; i < hex.size(); ++i) {
      const int nibble = hex_value(hex[i]);
      if (nibble < 0) throw Error(ErrorCode::InvalidArgument, "invalid hex digit in payload");
      for (int k = 0; k < 4; ++k) bits[4 * i + k] = static_cast<std::uint8_t>((nibble >> (3 - k)) & 1);
    }
    for (std::size_t i = n; i < bits.size(); ++i) {
      if (bits[i]) throw Error(ErrorCode::InvalidArgument, "payload hex padding bits must be zero");
    }
    bits.resize(n);
    return Payload(std::move(bits));
  }

  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    const std::size_t nibbles = (bits_.size() + 7) / 8 * 2;
    out.reserve(nibbles);
    for (std::size_t i = 0; i < nibbles; ++i) {
      int v = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        const std::size_t idx = 4 * i + k;
        v = (v << 1) | (idx < bits_.size() ? bits_[idx] : 0);
      }
      out.push_back(kDigits[v]);
    }
    return out;
  }

  std::size_t size() const noexcept { return bits_.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  friend bool operator==(const Payload&, const Payload&) = default;

 private:
  static int hex_value(char ch) {
    if (ch >= '0' && ch <= '9') return ch - '0';
    if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
    if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
    return -1;
  }

  std::vector<std::uint8_t> bits_;
};

struct SecretKey {
  std::uint64_t seed = 0;
  friend bool operator==(const SecretKey&, const SecretKey&) = default;
};

/// Error-correcting layer between payload bits and embedded (coded) bits.
struct Ecc {
  enum class Kind { None, Repetition };
  Kind kind = Kind::Repetition;
  int copies = 3;

  static Ecc none() { return {Kind::None, 1}; }
  static Ecc repetition(int r) { return {Kind::Repetition, r}; }

  int factor() const noexcept { return kind == Kind::None ? 1 : copies; }

  /// "none" or "repetition:<r>".
  std::string to_string() const {
    return kind == Kind::None ? "none" : "repetition:" + std::to_string(copies);
  }

  static Ecc parse(std::string_view text) {
    if (text == "none") return none();
    constexpr std::string_view prefix = "repetition:";
    if (text.substr(0, prefix.size()) == prefix) {
      const std::string digits(text.substr(prefix.size()));
      std::size_t used = 0;
      int r = 0;
      try {
        r = std::stoi(digits, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == digits.size() && !digits.empty() && r >= 1) return repetition(r);
    }
    throw Error(ErrorCode::InvalidArgument, "ecc must be 'none' or 'repetition:<r>', got '" +
                                                std::string(text) + "'");
  }

  friend bool operator==(const Ecc&, const Ecc&) = default;
};

struct EmbedConfig {
  /// Chip amplitude in orthonormal DCT units.
  double strength = 4.0;
  int payload_bits = 100;
  int chips_per_bit = 16;
  Ecc ecc = Ecc::repetition(3);
  /// Zig-zag indices of the 8x8 DCT coefficients that carry chips.
  std::vector<int> mid_band = {6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  /// Host-interference rejection bound, in multiples of strength. Before a
  /// bit is written, up to rejection * strength of the correlation already
  /// present on its chips is cancelled, so the embedded bit replaces
  /// whatever the slots carried.
  double rejection = 2.0;

  int coded_bits() const noexcept { return payload_bits * ecc.factor(); }
  std::size_t chips_needed() const noexcept {
    return static_cast<std::size_t>(coded_bits()) * chips_per_bit;
  }

  void validate() const {
    if (!std::isfinite(strength) || strength < 0.0)
      throw Error(ErrorCode::InvalidArgument, "strength must be finite and >= 0");
    if (!std::isfinite(rejection) || rejection < 0.0)
      throw Error(ErrorCode::InvalidArgument, "rejection must be finite and >= 0");
    if (payload_bits < 1) throw Error(ErrorCode::InvalidArgument, "payload_bits must be >= 1");
    if (chips_per_bit < 1) throw Error(ErrorCode::InvalidArgument, "chips_per_bit must be >= 1");
    if (ecc.copies < 1) throw Error(ErrorCode::InvalidArgument, "repetition count must be >= 1");
    if (mid_band.empty()) throw Error(ErrorCode::InvalidArgument, "mid_band must not be empty");
    std::vector<int> sorted = mid_band;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0 || sorted.back() > 63 ||
        std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Error(ErrorCode::InvalidArgument, "mid_band must hold distinct indices in [0, 63]");
    }
  }
};

struct DecodeResult {
  Payload bits;
  std::vector<double> confidences;
  double mean_confidence = 0.0;
};

/// Keyed +-1 chip sequence: chip i is the sign bit of the i-th SplitMix64 output.
inline std::vector<std::int8_t> pn_sequence(SecretKey key, std::size_t length) {
  SplitMix64 rng(key.seed);
  std::vector<std::int8_t> chips(length);
  for (auto& c : chips) c = (rng.next() >> 63) ? std::int8_t{1} : std::int8_t{-1};
  return chips;
}

inline Payload invert_bits(const Payload& p) {
  std::vector<std::uint8_t> bits(p.bits().begin(), p.bits().end());
  for (auto& b : bits) b ^= 1;
  return Payload(std::move(bits));
}

/// Repetition coding is block-interleaved: all first copies, then all second copies, ...
inline std::vector<std::uint8_t> ecc_encode(const Payload& p, const Ecc& mode) {
  const std::size_t copies = static_cast<std::size_t>(mode.factor());
  std::vector<std::uint8_t> coded;
  coded.reserve(p.size() * copies);
  for (std::size_t r = 0; r < copies; ++r) coded.insert(coded.end(), p.bits().begin(), p.bits().end());
  return coded;
}

/// Soft-decision decode. Bit = 1 iff the summed soft evidence is strictly
/// positive (an exact zero decodes to 0); confidence = |sum| / r.
inline DecodeResult ecc_decode(std::span<const double> coded, const Ecc& mode) {
  const std::size_t copies = static_cast<std::size_t>(mode.factor());
  if (copies == 0 || coded.size() % copies != 0) {
    throw Error(ErrorCode::LengthMismatch, "coded length " + std::to_string(coded.size()) +
                                               " is not a multiple of " + std::to_string(copies));
  }
  const std::size_t n = coded.size() / copies;
  std::vector<std::uint8_t> bits(n);
  DecodeResult result;
  result.confidences.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t r = 0; r < copies; ++r) sum += coded[r * n + i];
    bits[i] = sum > 0.0 ? 1 : 0;
    result.confidences[i] = std::abs(sum) / static_cast<double>(copies);
    total += result.confidences[i];
  }
  result.bits = Payload(std::move(bits));
  result.mean_confidence = n ? total / static_cast<double>(n) : 0.0;
  return result;
}

namespace detail {

/// Keyed assignment of chips to (block, coefficient) slots. Slot s lives in
/// block s / |mid_band| at zig-zag index mid_band[s % |mid_band|]. Chips
/// of coded bit j occupy slots[j * c .. j * c + c).
struct ChipPlan {
  int blocks_x = 0;
  int blocks_y = 0;
  std::vector<std::uint32_t> slots;
  std::vector<std::int8_t> chips;
};

inline std::size_t slot_capacity(int width, int height, const EmbedConfig& cfg) {
  return static_cast<std::size_t>(width / dct::kBlock) * (height / dct::kBlock) *
         cfg.mid_band.size();
}

inline ChipPlan plan_chips(int width, int height, SecretKey key, const EmbedConfig& cfg) {
  cfg.validate();
  ChipPlan plan;
  plan.blocks_x = width / dct::kBlock;
  plan.blocks_y = height / dct::kBlock;
  const std::size_t capacity = slot_capacity(width, height, cfg);
  const std::size_t needed = cfg.chips_needed();
  if (needed > capacity) {
    throw Error(ErrorCode::CapacityExceeded,
                std::to_string(needed) + " chip slots needed, " + std::to_string(capacity) +
                    " available in a " + std::to_string(width) + "x" + std::to_string(height) +
                    " image");
  }
  // Forward Fisher-Yates, stopped after the slots actually used.
  std::vector<std::uint32_t> perm(capacity);
  std::iota(perm.begin(), perm.end(), 0u);
  SplitMix64 rng(derive_seed(key.seed, "slot-permutation"));
  for (std::size_t i = 0; i < needed; ++i) {
    const std::size_t j = i + rng.below(capacity - i);
    std::swap(perm[i], perm[j]);
  }
  perm.resize(needed);
  plan.slots = std::move(perm);
  plan.chips = pn_sequence(SecretKey{derive_seed(key.seed, "chips")}, needed);
  return plan;
}

inline dct::Block load_block(const LumaPlane& plane, int bx, int by) {
  dct::Block block{};
  for (int y = 0; y < dct::kBlock; ++y)
    for (int x = 0; x < dct::kBlock; ++x)
      block[y * dct::kBlock + x] = plane.at(bx * dct::kBlock + x, by * dct::kBlock + y);
  return block;
}

/// Forward DCT of every block that carries at least one chip.
class BlockCoefficients {
 public:
  BlockCoefficients(const LumaPlane& luma, const ChipPlan& plan, std::size_t band_size)
      : band_size_(band_size),
        blocks_x_(plan.blocks_x),
        coeffs_(static_cast<std::size_t>(plan.blocks_x) * plan.blocks_y),
        present_(coeffs_.size(), false) {
    for (auto slot : plan.slots) {
      const std::size_t block = slot / band_size_;
      if (present_[block]) continue;
      const int bx = static_cast<int>(block % blocks_x_);
      const int by = static_cast<int>(block / blocks_x_);
      coeffs_[block] = dct::forward(load_block(luma, bx, by));
      present_[block] = true;
    }
  }

  double& at(std::uint32_t slot, const std::vector<int>& band) {
    return coeffs_[slot / band_size_][dct::kZigZag[band[slot % band_size_]]];
  }

 private:
  std::size_t band_size_;
  int blocks_x_;
  std::vector<dct::Block> coeffs_;
  std::vector<bool> present_;
};

}  // namespace detail

/// Writes the payload into the luma DCT mid-band. Each coded bit b spreads
/// over chips_per_bit keyed slots; its slot coefficients move along the
/// chip pattern s by (strength * (b ? +1 : -1) - clamp(rho)) where rho is
/// the correlation already present and the clamp is +-rejection*strength.
inline RasterImage embed(const RasterImage& img, const Payload& p, SecretKey key,
                         const EmbedConfig& cfg) {
  if (p.size() != static_cast<std::size_t>(cfg.payload_bits)) {
    throw Error(ErrorCode::LengthMismatch, "payload has " + std::to_string(p.size()) +
                                               " bits, config expects " +
                                               std::to_string(cfg.payload_bits));
  }
  const detail::ChipPlan plan = detail::plan_chips(img.width(), img.height(), key, cfg);
  const LumaPlane luma = to_luma(img);
  detail::BlockCoefficients coeffs(luma, plan, cfg.mid_band.size());

  const std::vector<std::uint8_t> coded = ecc_encode(p, cfg.ecc);
  const std::size_t c = static_cast<std::size_t>(cfg.chips_per_bit);
  const double bound = cfg.rejection * cfg.strength;

  const std::size_t block_count = static_cast<std::size_t>(plan.blocks_x) * plan.blocks_y;
  std::vector<dct::Block> delta(block_count);
  std::vector<bool> touched(block_count, false);
  const std::size_t band = cfg.mid_band.size();

  for (std::size_t j = 0; j < coded.size(); ++j) {
    double rho = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      const std::size_t k = j * c + i;
      rho += coeffs.at(plan.slots[k], cfg.mid_band) * plan.chips[k];
    }
    rho /= static_cast<double>(c);
    const double target = coded[j] ? cfg.strength : -cfg.strength;
    const double step = target - std::clamp(rho, -bound, bound);
    if (step == 0.0) continue;
    for (std::size_t i = 0; i < c; ++i) {
      const std::size_t k = j * c + i;
      const std::uint32_t slot = plan.slots[k];
      delta[slot / band][dct::kZigZag[cfg.mid_band[slot % band]]] += step * plan.chips[k];
      touched[slot / band] = true;
    }
  }

  LumaPlane shifted = luma;
  for (std::size_t block = 0; block < block_count; ++block) {
    if (!touched[block]) continue;
    const dct::Block spatial = dct::inverse(delta[block]);
    const int bx = static_cast<int>(block % plan.blocks_x);
    const int by = static_cast<int>(block / plan.blocks_x);
    for (int y = 0; y < dct::kBlock; ++y)
      for (int x = 0; x < dct::kBlock; ++x)
        shifted.at(bx * dct::kBlock + x, by * dct::kBlock + y) += spatial[y * dct::kBlock + x];
  }
  return merge_luma(img, shifted);
}

/// Blind decode. The soft value of a coded bit is the normalized correlation
/// sum(C*s) / sqrt(c * sum(C^2)) of its slot coefficients with its chips.
inline DecodeResult extract(const RasterImage& img, SecretKey key, const EmbedConfig& cfg) {
  const detail::ChipPlan plan = detail::plan_chips(img.width(), img.height(), key, cfg);
  const LumaPlane luma = to_luma(img);
  detail::BlockCoefficients coeffs(luma, plan, cfg.mid_band.size());

  const std::size_t c = static_cast<std::size_t>(cfg.chips_per_bit);
  const std::size_t coded_bits = static_cast<std::size_t>(cfg.coded_bits());
  std::vector<double> soft(coded_bits);
  for (std::size_t j = 0; j < coded_bits; ++j) {
    double corr = 0.0;
    double energy = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      const std::size_t k = j * c + i;
      const double v = coeffs.at(plan.slots[k], cfg.mid_band);
      corr += v * plan.chips[k];
      energy += v * v;
    }
    soft[j] = energy > 0.0 ? corr / std::sqrt(static_cast<double>(c) * energy) : 0.0;
  }
  return ecc_decode(soft, cfg.ecc);
}

}  // namespace wmattack
