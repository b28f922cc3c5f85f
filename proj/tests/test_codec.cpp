#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "wmattack/codec.hpp"
#include "wmattack/corpus.hpp"
#include "wmattack/metrics.hpp"

using namespace wmattack;

namespace {

const SecretKey kKey{42};

double mean_abs_change(const RasterImage& a, const RasterImage& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) s += std::abs(a.pixels()[i] - b.pixels()[i]);
  return s / static_cast<double>(a.pixels().size());
}

}  // namespace

TEST(PnSequence, DeterministicAndBipolar) {
  const auto a = pn_sequence(SecretKey{7}, 1000);
  EXPECT_EQ(a, pn_sequence(SecretKey{7}, 1000));
  EXPECT_NE(a, pn_sequence(SecretKey{8}, 1000));
  for (auto c : a) EXPECT_TRUE(c == 1 || c == -1);
  // Prefix-stable: a shorter request is a prefix of a longer one.
  const auto b = pn_sequence(SecretKey{7}, 10);
  EXPECT_TRUE(std::equal(b.begin(), b.end(), a.begin()));
}

TEST(PnSequence, BalancedOverAMillionChips) {
  const auto chips = pn_sequence(SecretKey{123456789}, 1'000'000);
  const double mean = std::accumulate(chips.begin(), chips.end(), 0.0) / chips.size();
  EXPECT_LT(std::abs(mean), 0.01);
}

TEST(PnSequence, FrozenPrefix) {
  // Cross-platform reproducibility: the first outputs of the generator are fixed.
  EXPECT_EQ(mix64(kGoldenGamma), 0xE220A8397B1DCDAFULL);
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
}

TEST(Ecc, RepetitionInterleaves) {
  const Payload p(std::vector<std::uint8_t>{1, 0});
  EXPECT_EQ(ecc_encode(p, Ecc::repetition(3)), (std::vector<std::uint8_t>{1, 0, 1, 0, 1, 0}));
  EXPECT_EQ(ecc_encode(p, Ecc::none()), (std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(ecc_encode(Payload::zeros(7), Ecc::repetition(5)).size(), 35u);
}

TEST(Ecc, SoftDecision) {
  const std::vector<double> soft = {0.9, 0.8, -0.7};
  const auto one = ecc_decode(soft, Ecc::repetition(3));
  ASSERT_EQ(one.bits.size(), 1u);
  EXPECT_EQ(one.bits[0], 1);
  EXPECT_NEAR(one.confidences[0], 1.0 / 3.0, 1e-15);

  const std::vector<double> positive = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  EXPECT_EQ(ecc_decode(positive, Ecc::repetition(2)).bits, Payload(std::vector<std::uint8_t>{1, 1, 1}));

  const std::vector<double> tie = {0.5, -0.5};
  const auto t = ecc_decode(tie, Ecc::repetition(2));
  EXPECT_EQ(t.bits[0], 0);
  EXPECT_EQ(t.confidences[0], 0.0);

  const std::vector<double> raw = {-0.25, 0.5};
  const auto n = ecc_decode(raw, Ecc::none());
  EXPECT_EQ(n.bits, Payload(std::vector<std::uint8_t>{0, 1}));
  EXPECT_DOUBLE_EQ(n.confidences[0], 0.25);
  EXPECT_DOUBLE_EQ(n.mean_confidence, 0.375);

  const std::vector<double> bad(4, 1.0);
  EXPECT_THROW(ecc_decode(bad, Ecc::repetition(3)), Error);
}

TEST(Ecc, Parse) {
  EXPECT_EQ(Ecc::parse("none"), Ecc::none());
  EXPECT_EQ(Ecc::parse("repetition:5"), Ecc::repetition(5));
  EXPECT_THROW(Ecc::parse("repetition:0"), Error);
  EXPECT_THROW(Ecc::parse("repetition:x"), Error);
  EXPECT_THROW(Ecc::parse("bch"), Error);
}

TEST(Payload, HexIsMsbFirstAndPadded) {
  std::vector<std::uint8_t> bits(12, 0);
  bits[0] = 1;
  bits[11] = 1;
  const Payload p(bits);
  EXPECT_EQ(p.to_hex(), "8010");
  EXPECT_EQ(Payload::from_hex("8010", 12), p);
  EXPECT_EQ(Payload::from_hex("80AB", 16).to_hex(), "80ab");
  EXPECT_EQ(Payload::random(100, 1).to_hex().size(), 26u);
  EXPECT_THROW(Payload::from_hex("8011", 12), Error);  // padding bit set
  EXPECT_THROW(Payload::from_hex("801", 12), Error);
  EXPECT_THROW(Payload::from_hex("80g0", 12), Error);
  EXPECT_THROW(Payload(std::vector<std::uint8_t>{0, 2}), Error);
}

TEST(Payload, HexRoundtripProperty) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t n = 1 + seed % 131;
    const Payload p = Payload::random(n, seed);
    EXPECT_EQ(Payload::from_hex(p.to_hex(), n), p);
  }
}

TEST(InvertBits, DefinitionAndInvolution) {
  EXPECT_EQ(invert_bits(Payload(std::vector<std::uint8_t>{0, 1, 0, 1})),
            Payload(std::vector<std::uint8_t>{1, 0, 1, 0}));
  const Payload ones = invert_bits(Payload::zeros(100));
  for (auto b : ones.bits()) EXPECT_EQ(b, 1);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Payload p = Payload::random(100, seed);
    EXPECT_EQ(invert_bits(invert_bits(p)), p);
    EXPECT_EQ(bit_accuracy(p, invert_bits(p)), 0.0);
  }
}

TEST(EmbedConfig, Validation) {
  EmbedConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.chips_needed(), 4800u);
  cfg.mid_band = {6, 6};
  EXPECT_THROW(cfg.validate(), Error);
  cfg = EmbedConfig{};
  cfg.strength = -1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = EmbedConfig{};
  cfg.chips_per_bit = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Codec, MidGrayRoundtrip) {
  const RasterImage gray(256, 256, {128, 128, 128});
  const Payload p = Payload::random(100, 5);
  const RasterImage w = embed(gray, p, kKey, EmbedConfig{});
  const DecodeResult d = extract(w, kKey, EmbedConfig{});
  EXPECT_EQ(d.bits, p);
  EXPECT_EQ(d.confidences.size(), 100u);
  for (double c : d.confidences) EXPECT_GE(c, 0.0);
  EXPECT_GT(d.mean_confidence, 0.9);
}

TEST(Codec, ZeroStrengthIsIdentity) {
  EmbedConfig cfg;
  cfg.strength = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RasterImage img = synthetic_image(256, 256, seed);
    EXPECT_EQ(embed(img, Payload::random(100, seed), kKey, cfg), img);
  }
}

TEST(Codec, ImperceptibilityAtDefaults) {
  const EmbedConfig cfg;
  double worst_psnr = 1e9;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RasterImage img = synthetic_image(256, 256, 500 + seed);
    const RasterImage w = embed(img, Payload::random(100, seed), kKey, cfg);
    worst_psnr = std::min(worst_psnr, psnr(w, img));
    EXPECT_LE(mean_abs_change(w, img), cfg.strength);
  }
  EXPECT_GE(worst_psnr, 35.0);
}

TEST(Codec, RoundtripOnSyntheticImages) {
  const EmbedConfig cfg;
  int exact = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const RasterImage img = synthetic_image(256, 256, 9000 + seed);
    const Payload p = Payload::random(100, 31 * seed + 1);
    exact += extract(embed(img, p, kKey, cfg), kKey, cfg).bits == p;
  }
  EXPECT_EQ(exact, 30);
}

TEST(Codec, RoundtripWithoutEcc) {
  EmbedConfig cfg;
  cfg.ecc = Ecc::none();
  const RasterImage img = synthetic_image(256, 256, 3);
  const Payload p = Payload::random(100, 3);
  EXPECT_EQ(extract(embed(img, p, kKey, cfg), kKey, cfg).bits, p);
}

TEST(Codec, WrongKeyLooksRandom) {
  const EmbedConfig cfg;
  double total = 0;
  int inside = 0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    const RasterImage img = synthetic_image(256, 256, 700 + t);
    const Payload p = Payload::random(100, 900 + t);
    const RasterImage w = embed(img, p, kKey, cfg);
    const double acc = bit_accuracy(extract(w, SecretKey{derive_seed(t, "wrong")}, cfg).bits, p);
    total += acc;
    inside += acc >= 0.4 && acc <= 0.6;
  }
  EXPECT_NEAR(total / trials, 0.5, 0.05);
  EXPECT_GE(inside, trials * 85 / 100);
}

TEST(Codec, WatermarkedConfidenceSeparatesFromClean) {
  const EmbedConfig cfg;
  double clean_max = 0, marked_min = 1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RasterImage img = synthetic_image(256, 256, 40 + seed);
    clean_max = std::max(clean_max, extract(img, kKey, cfg).mean_confidence);
    marked_min = std::min(marked_min, extract(embed(img, Payload::random(100, seed), kKey, cfg), kKey, cfg).mean_confidence);
  }
  EXPECT_LT(clean_max, marked_min);
}

TEST(Codec, CapacityAndLengthErrors) {
  const RasterImage small(16, 16, {100, 100, 100});
  try {
    embed(small, Payload::zeros(100), kKey, EmbedConfig{});
    ADD_FAILURE() << "capacity not enforced";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CapacityExceeded);
  }
  EXPECT_THROW(extract(small, kKey, EmbedConfig{}), Error);

  EmbedConfig tiny;
  tiny.payload_bits = 4;
  tiny.chips_per_bit = 2;
  tiny.ecc = Ecc::none();
  // 4 blocks x 10 slots = 40 >= 8 chips.
  EXPECT_NO_THROW(embed(small, Payload::zeros(4), kKey, tiny));

  try {
    embed(RasterImage(64, 64, {1, 1, 1}), Payload::zeros(99), kKey, EmbedConfig{});
    ADD_FAILURE() << "payload length not enforced";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(Codec, Deterministic) {
  const RasterImage img = synthetic_image(256, 256, 77);
  const Payload p = Payload::random(100, 77);
  const RasterImage a = embed(img, p, kKey, EmbedConfig{});
  EXPECT_EQ(a, embed(img, p, kKey, EmbedConfig{}));
  const auto d1 = extract(a, kKey, EmbedConfig{});
  const auto d2 = extract(a, kKey, EmbedConfig{});
  EXPECT_EQ(d1.bits, d2.bits);
  EXPECT_EQ(d1.confidences, d2.confidences);
}

TEST(Codec, OnlyLumaMoves) {
  // Every pixel is shifted equally on all channels unless a channel clips.
  const RasterImage img = synthetic_image(256, 256, 11);
  const RasterImage w = embed(img, Payload::random(100, 11), kKey, EmbedConfig{});
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) {
      const int d0 = w.at(x, y, 0) - img.at(x, y, 0);
      bool clipped = false;
      for (int c = 0; c < 3; ++c) clipped |= w.at(x, y, c) == 0 || w.at(x, y, c) == 255;
      if (clipped) continue;
      EXPECT_EQ(w.at(x, y, 1) - img.at(x, y, 1), d0);
      EXPECT_EQ(w.at(x, y, 2) - img.at(x, y, 2), d0);
    }
}
