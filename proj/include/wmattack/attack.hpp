#pragma once

#include "wmattack/codec.hpp"
#include "wmattack/image.hpp"
#include "wmattack/metrics.hpp"

namespace wmattack {

/// Intermediate artifacts of one overwrite attack.
struct AttackTrace {
  DecodeResult recovered;
  Payload inverted;
  /// The inverted message is written into the watermarked image the attacker
  /// holds; no clean original is assumed.
  RasterImage attacked_image;
  /// Bit accuracy of the attacked image's decode against `recovered.bits`.
  double residual_accuracy = 0.0;
};

/// Decode the hidden message, flip every bit, embed the flipped message with
/// the same key and configuration. Runs unconditionally, with no detection gate.
inline AttackTrace overwrite_attack(const RasterImage& watermarked, SecretKey key,
                                    const EmbedConfig& cfg) {
  DecodeResult recovered = extract(watermarked, key, cfg);
  Payload inverted = invert_bits(recovered.bits);
  RasterImage attacked = embed(watermarked, inverted, key, cfg);
  const double residual = bit_accuracy(extract(attacked, key, cfg).bits, recovered.bits);
  return AttackTrace{std::move(recovered), std::move(inverted), std::move(attacked), residual};
}

}  // namespace wmattack
