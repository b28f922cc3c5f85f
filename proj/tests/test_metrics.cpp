#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "test_support.hpp"
#include "wmattack/metrics.hpp"

using namespace wmattack;

TEST(Psnr, ClosedForms) {
  const RasterImage a = oracle::noise_image(32, 32, 1);
  EXPECT_EQ(psnr(a, a), kPsnrInfinite);
  EXPECT_TRUE(std::isinf(psnr(a, a)));

  const RasterImage low(16, 16, {10, 20, 30});
  const RasterImage high(16, 16, {11, 21, 31});
  EXPECT_NEAR(psnr(low, high), 20.0 * std::log10(255.0), 1e-12);
  EXPECT_NEAR(psnr(low, high), 48.1308, 1e-4);

  EXPECT_EQ(psnr(RasterImage(16, 16, {0, 0, 0}), RasterImage(16, 16, {255, 255, 255})), 0.0);
  EXPECT_THROW(psnr(a, low), Error);
  EXPECT_EQ(capped_psnr(kPsnrInfinite), kPsnrCap);
}

TEST(Psnr, SymmetricAndMatchesOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RasterImage a = oracle::noise_image(48, 40, seed);
    const RasterImage b = oracle::perturbed(a, 1 + static_cast<int>(seed % 7), seed + 100);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
    EXPECT_NEAR(psnr(a, b), oracle::psnr(a, b), 1e-6);
  }
}

TEST(Ssim, SelfSimilarityAndConstantPair) {
  const RasterImage a = oracle::noise_image(40, 30, 2);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double expected = c1 / (255.0 * 255.0 + c1);
  EXPECT_NEAR(ssim(RasterImage(16, 16, {0, 0, 0}), RasterImage(16, 16, {255, 255, 255})), expected, 1e-12);
  EXPECT_NEAR(expected, 9.999e-5, 1e-8);
}

TEST(Ssim, MatchesBruteForceAndStaysBounded) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RasterImage a = oracle::noise_image(40, 33, 10 + seed);
    const RasterImage b = seed % 3 == 0 ? oracle::noise_image(40, 33, 500 + seed)
                                        : oracle::perturbed(a, 3 + 5 * static_cast<int>(seed % 5), seed);
    const double fast = ssim(a, b);
    EXPECT_NEAR(fast, oracle::ssim(a, b), 1e-6);
    EXPECT_LE(std::abs(fast), 1.0);
  }
}

TEST(Ssim, RejectsSmallOrMismatched) {
  EXPECT_THROW(ssim(RasterImage(16, 16, {0, 0, 0}), RasterImage(17, 16, {0, 0, 0})), Error);
}

TEST(Nmi, IdentityBijectionAndIndependence) {
  const RasterImage a = oracle::noise_image(64, 64, 3);
  EXPECT_NEAR(nmi(a, a), 1.0, 1e-12);

  // Gray image and its negative: luma bins are an exact bijection.
  RasterImage g = a;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) g.at(x, y, 1) = g.at(x, y, 2) = g.at(x, y, 0);
  RasterImage neg = g;
  for (auto& v : neg.pixels()) v = static_cast<std::uint8_t>(255 - v);
  EXPECT_NEAR(nmi(g, neg), 1.0, 1e-12);

  const RasterImage x = oracle::noise_image(256, 256, 4);
  const RasterImage y = oracle::noise_image(256, 256, 5);
  EXPECT_LT(nmi(x, y), 0.1);

  EXPECT_EQ(nmi(RasterImage(16, 16, {3, 3, 3}), RasterImage(16, 16, {9, 9, 9})), 1.0);
  EXPECT_EQ(nmi(RasterImage(16, 16, {3, 3, 3}), oracle::noise_image(16, 16, 6)), 0.0);
}

TEST(Nmi, MatchesOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RasterImage a = oracle::noise_image(50, 30, 40 + seed);
    const RasterImage b = oracle::perturbed(a, 2 + 9 * static_cast<int>(seed % 4), 80 + seed);
    const double v = nmi(a, b);
    EXPECT_NEAR(v, oracle::nmi(a, b), 1e-6);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(BitAccuracy, Basics) {
  const Payload p = Payload::random(100, 1);
  EXPECT_EQ(bit_accuracy(p, p), 1.0);
  EXPECT_EQ(bit_accuracy(p, invert_bits(p)), 0.0);
  const Payload half(std::vector<std::uint8_t>{1, 1, 0, 0});
  EXPECT_EQ(bit_accuracy(half, Payload(std::vector<std::uint8_t>{1, 0, 1, 0})), 0.5);
  EXPECT_THROW(bit_accuracy(p, Payload::zeros(99)), Error);
}

TEST(DetectionThreshold, SmallCases) {
  EXPECT_EQ(detection_threshold(1, 0.6), 1);
  EXPECT_EQ(detection_threshold(1, 0.4), 2);
  EXPECT_EQ(detection_threshold(10, 1.0), 0);
  EXPECT_EQ(detection_threshold(100, 0.001), oracle::binomial_threshold(100, 0.001));
  EXPECT_THROW(detection_threshold(0, 0.1), Error);
  EXPECT_THROW(detection_threshold(10, 0.0), Error);
}

TEST(DetectionThreshold, AgreesWithBigIntegerOracle) {
  for (int n = 1; n <= 64; ++n)
    for (double budget : {0.1, 0.01, 0.001})
      EXPECT_EQ(detection_threshold(n, budget), oracle::binomial_threshold(n, budget)) << n << " " << budget;
  for (int n : {100, 128, 200, 256})
    EXPECT_EQ(detection_threshold(n, 0.001), oracle::binomial_threshold(n, 0.001)) << n;
}

TEST(TprAtFpr, WorkedExample) {
  const std::vector<double> neg = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::vector<double> pos = {8, 9, 10};
  const auto s = tpr_at_fpr(pos, neg, 0.1);
  EXPECT_EQ(s.threshold, 9.0);
  EXPECT_NEAR(s.tpr, 2.0 / 3.0, 1e-15);
  EXPECT_LE(s.fpr, 0.1);
  EXPECT_EQ(s.n_pos, 3u);
  EXPECT_EQ(s.n_neg, 10u);
}

TEST(TprAtFpr, SeparableAndIdentical) {
  const std::vector<double> neg = {0.1, 0.5, 0.2};
  const std::vector<double> pos = {0.6, 0.9};
  for (double b : {0.0, 0.001, 0.5, 1.0}) EXPECT_EQ(tpr_at_fpr(pos, neg, b).tpr, 1.0);

  std::vector<double> same(1000);
  SplitMix64 rng(5);
  for (auto& v : same) v = rng.uniform();
  const auto s = tpr_at_fpr(same, same, 0.001);
  EXPECT_LE(s.tpr, 0.002);
  EXPECT_LE(s.fpr, 0.001);
}

TEST(TprAtFpr, Errors) {
  const std::vector<double> some = {1.0};
  const std::vector<double> none;
  EXPECT_THROW(tpr_at_fpr(none, some, 0.1), Error);
  EXPECT_THROW(tpr_at_fpr(some, none, 0.1), Error);
}

TEST(TprAtFpr, ThresholdIsMinimalWithinBudget) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> pos(1 + rng.below(10)), neg(1 + rng.below(10));
    for (auto& v : pos) v = static_cast<double>(rng.below(6));
    for (auto& v : neg) v = static_cast<double>(rng.below(6));
    const double budget = rng.uniform();
    const auto s = tpr_at_fpr(pos, neg, budget);
    EXPECT_LE(s.fpr, budget);
    // Any lower candidate breaks the budget.
    std::vector<double> all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    for (double t : all) {
      if (t >= s.threshold) continue;
      std::size_t fp = 0;
      for (double v : neg) fp += v >= t;
      EXPECT_GT(static_cast<double>(fp) / neg.size(), budget);
    }
  }
}

TEST(QScore, PublishedCoefficients) {
  EXPECT_EQ(q_score(QualityVector{}), 0.0);
  QualityVector v;
  v.lpips = 1.0;
  EXPECT_NEAR(q_score(v), 0.341, 1e-12);
  const QualityVector w{10, 2, 30, 0.9, 1.0, 0.1, 0, 0};
  EXPECT_NEAR(q_score(w), -0.20756, 1e-12);

  const QualityWeights weights;
  EXPECT_EQ(weights.fid, 1.53e-3);
  EXPECT_EQ(weights.clipfid, 5.07e-3);
  EXPECT_EQ(weights.psnr, -2.22e-3);
  EXPECT_EQ(weights.ssim, -1.13e-1);
  EXPECT_EQ(weights.nmi, -9.88e-2);
  EXPECT_EQ(weights.lpips, 3.41e-1);
  EXPECT_EQ(weights.delta_aesthetics, 4.50e-2);
  EXPECT_EQ(weights.delta_artifacts, -1.44e-1);
}

TEST(QScore, LinearityProperty) {
  SplitMix64 rng(3);
  auto random_vector = [&] {
    QualityVector v;
    for (double* f : {&v.fid, &v.clipfid, &v.psnr, &v.ssim, &v.nmi, &v.lpips, &v.delta_aesthetics,
                      &v.delta_artifacts})
      *f = rng.uniform() * 20.0 - 5.0;
    return v;
  };
  for (int i = 0; i < 500; ++i) {
    const QualityVector a = random_vector(), b = random_vector();
    EXPECT_NEAR(q_score(a + b), q_score(a) + q_score(b), 1e-12);
  }
}

TEST(QScore, RejectsNonFinite) {
  QualityVector v;
  v.psnr = kPsnrInfinite;
  EXPECT_THROW(q_score(v), Error);
  v.psnr = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(q_score(v), Error);
}

TEST(OverallScore, Values) {
  EXPECT_EQ(overall_score(0.0, 0.130), 0.130);
  EXPECT_EQ(overall_score(0.0, 0.0), 0.0);
  EXPECT_NEAR(overall_score(0.3, 0.4), 0.5, 1e-15);
  EXPECT_EQ(overall_score(0.25, -0.7), overall_score(0.25, 0.7));
}

TEST(ExternalMetrics, EmptyAndPartialSidecars) {
  const auto empty = parse_external_metrics(nlohmann::json::object());
  const auto none = empty.lookup("img1");
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(none.values[i], 0.0);
    EXPECT_TRUE(none.defaulted[i]);
  }

  const auto table = parse_external_metrics(nlohmann::json::parse(R"({"img1": {"lpips": 0.1}})"));
  const auto m = table.lookup("img1");
  EXPECT_EQ(m.lpips(), 0.1);
  EXPECT_FALSE(m.defaulted[2]);
  EXPECT_TRUE(m.defaulted[0]);
  EXPECT_TRUE(table.lookup("img2").defaulted[2]);
}

TEST(ExternalMetrics, SetLevelValuesWithOverrides) {
  const auto table = parse_external_metrics(
      nlohmann::json::parse(R"({"*": {"fid": 12.5, "lpips": 0.2}, "a": {"lpips": 0.05}})"));
  const auto a = table.lookup("a");
  EXPECT_EQ(a.fid(), 12.5);
  EXPECT_EQ(a.lpips(), 0.05);
  const auto b = table.lookup("b");
  EXPECT_EQ(b.lpips(), 0.2);
  EXPECT_FALSE(b.defaulted[0]);
  EXPECT_TRUE(b.defaulted[1]);
}

TEST(ExternalMetrics, Validation) {
  try {
    parse_external_metrics(nlohmann::json::parse(R"({"img1": {"lpipz": 0.1}})"));
    ADD_FAILURE() << "unknown key accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownField);
    EXPECT_NE(std::string(e.what()).find("lpipz"), std::string::npos);
  }
  EXPECT_THROW(parse_external_metrics(nlohmann::json::parse(R"([1, 2])")), Error);
  EXPECT_THROW(parse_external_metrics(nlohmann::json::parse(R"({"a": 3})")), Error);
  EXPECT_THROW(parse_external_metrics(nlohmann::json::parse(R"({"a": {"fid": "x"}})")), Error);

  testing_support::TempDir dir;
  {
    std::ofstream bad(dir / "bad.json");
    bad << "{ not json";
  }
  try {
    load_external_metrics(dir / "bad.json");
    ADD_FAILURE() << "malformed JSON accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedJson);
  }
  {
    std::ofstream huge(dir / "huge.json");
    huge << R"({"a": {"fid": 1e999}})";
  }
  EXPECT_THROW(load_external_metrics(dir / "huge.json"), Error);
  EXPECT_THROW(load_external_metrics(dir / "absent.json"), Error);
}
