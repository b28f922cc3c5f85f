#pragma once

#include <algorithm>
#include <array>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wmattack/codec.hpp"
#include "wmattack/error.hpp"
#include "wmattack/image.hpp"

namespace wmattack {

// ---------------------------------------------------------------------------
// Pairwise image metrics
// ---------------------------------------------------------------------------

inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();
/// Identical images have infinite PSNR; this is the value that enters Q instead.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(255^2 / MSE) over all RGB samples; identical images give +inf.
inline double psnr(const RasterImage& a, const RasterImage& b) {
  require_same_shape(a, b, "psnr");
  auto pa = a.pixels();
  auto pb = b.pixels();
  std::uint64_t sse = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const std::int64_t d = static_cast<std::int64_t>(pa[i]) - pb[i];
    sse += static_cast<std::uint64_t>(d * d);
  }
  if (sse == 0) return kPsnrInfinite;
  const double mse = static_cast<double>(sse) / static_cast<double>(pa.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

inline double capped_psnr(double value) { return std::min(value, kPsnrCap); }

namespace ssim_constants {
inline constexpr int kWindow = 11;
inline constexpr double kSigma = 1.5;
inline constexpr double kK1 = 0.01;
inline constexpr double kK2 = 0.03;
inline constexpr double kRange = 255.0;
}  // namespace ssim_constants

namespace detail {

inline std::array<double, ssim_constants::kWindow> gaussian_taps() {
  using namespace ssim_constants;
  std::array<double, kWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Valid-mode separable filter: output is (w - 10) x (h - 10).
inline std::vector<double> filter_valid(const std::vector<double>& in, int w, int h) {
  using ssim_constants::kWindow;
  static const auto taps = gaussian_taps();
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += taps[k] * in[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += taps[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace detail

/// Mean SSIM over all fully-contained 11x11 Gaussian (sigma 1.5) windows of the
/// luma planes, with K1 = 0.01, K2 = 0.03, L = 255.
inline double ssim(const RasterImage& a, const RasterImage& b) {
  using namespace ssim_constants;
  require_same_shape(a, b, "ssim");
  const int w = a.width();
  const int h = a.height();
  if (w < kWindow || h < kWindow) {
    throw Error(ErrorCode::InvalidImage, "ssim needs images of at least 11x11");
  }
  const auto la = to_luma(a).values;
  const auto lb = to_luma(b).values;
  std::vector<double> aa(la.size()), bb(la.size()), ab(la.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    aa[i] = la[i] * la[i];
    bb[i] = lb[i] * lb[i];
    ab[i] = la[i] * lb[i];
  }
  const auto mu_a = detail::filter_valid(la, w, h);
  const auto mu_b = detail::filter_valid(lb, w, h);
  const auto e_aa = detail::filter_valid(aa, w, h);
  const auto e_bb = detail::filter_valid(bb, w, h);
  const auto e_ab = detail::filter_valid(ab, w, h);

  const double c1 = (kK1 * kRange) * (kK1 * kRange);
  const double c2 = (kK2 * kRange) * (kK2 * kRange);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return std::clamp(total / static_cast<double>(mu_a.size()), -1.0, 1.0);
}

/// 2 I(A;B) / (H(A) + H(B)) over the 256x256 joint histogram of rounded luma.
/// Two constant images (both entropies zero) score 1.
inline double nmi(const RasterImage& a, const RasterImage& b) {
  require_same_shape(a, b, "nmi");
  const auto la = to_luma(a).values;
  const auto lb = to_luma(b).values;
  std::vector<std::uint32_t> joint(256 * 256, 0);
  std::array<std::uint32_t, 256> ha{}, hb{};
  for (std::size_t i = 0; i < la.size(); ++i) {
    const int x = static_cast<int>(std::clamp(std::round(la[i]), 0.0, 255.0));
    const int y = static_cast<int>(std::clamp(std::round(lb[i]), 0.0, 255.0));
    ++joint[x * 256 + y];
    ++ha[x];
    ++hb[y];
  }
  const double n = static_cast<double>(la.size());
  auto entropy = [n](std::span<const std::uint32_t> counts) {
    double h = 0.0;
    for (auto c : counts) {
      if (c == 0) continue;
      const double p = c / n;
      h -= p * std::log(p);
    }
    return h;
  };
  const double h_a = entropy(ha);
  const double h_b = entropy(hb);
  if (h_a + h_b == 0.0) return 1.0;
  double mi = 0.0;
  for (int x = 0; x < 256; ++x)
    for (int y = 0; y < 256; ++y) {
      const std::uint32_t c = joint[x * 256 + y];
      if (c == 0) continue;
      mi += (c / n) * std::log(c * n / (static_cast<double>(ha[x]) * hb[y]));
    }
  return std::clamp(2.0 * mi / (h_a + h_b), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

inline std::size_t matching_bits(const Payload& x, const Payload& y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "payload lengths differ: " + std::to_string(x.size()) +
                                               " vs " + std::to_string(y.size()));
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < x.size(); ++i) same += x[i] == y[i];
  return same;
}

inline double bit_accuracy(const Payload& x, const Payload& y) {
  const std::size_t same = matching_bits(x, y);
  return x.size() ? static_cast<double>(same) / static_cast<double>(x.size()) : 1.0;
}

/// Smallest k such that P[Binomial(n, 1/2) >= k] <= fpr_budget, using exact
/// integer tail sums compared against fpr_budget * 2^n without rounding.
inline int detection_threshold(int n_bits, double fpr_budget) {
  using boost::multiprecision::cpp_int;
  if (n_bits < 1) throw Error(ErrorCode::InvalidArgument, "n_bits must be >= 1");
  if (!(fpr_budget > 0.0 && fpr_budget <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "fpr_budget must lie in (0, 1]");
  }
  // budget = mantissa * 2^exponent exactly, with an integer mantissa.
  int exponent = 0;
  const double frac = std::frexp(fpr_budget, &exponent);
  const auto mantissa = static_cast<std::uint64_t>(std::ldexp(frac, 53));
  exponent -= 53;
  const int shift = exponent + n_bits;  // compare tail <= mantissa * 2^shift
  auto within_budget = [&](const cpp_int& tail) {
    if (shift >= 0) return tail <= (cpp_int(mantissa) << shift);
    return (tail << -shift) <= cpp_int(mantissa);
  };

  // binom[k] = C(n, k) by the multiplicative recurrence.
  std::vector<cpp_int> binom(static_cast<std::size_t>(n_bits) + 1);
  binom[0] = 1;
  for (int k = 1; k <= n_bits; ++k) binom[k] = binom[k - 1] * (n_bits - k + 1) / k;

  // Tails shrink as k grows, so scan downward from k = n + 1 (tail 0).
  cpp_int tail = 0;
  int best = n_bits + 1;
  for (int k = n_bits; k >= 0; --k) {
    tail += binom[k];
    if (!within_budget(tail)) break;
    best = k;
  }
  return best;
}

struct DetectionStats {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double fpr_budget = 0.001;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// TPR at the smallest candidate threshold t (any observed score, or +inf)
/// whose empirical FPR, the fraction of negatives with score >= t, stays
/// within budget. Detection is score >= t.
inline DetectionStats tpr_at_fpr(std::span<const double> pos, std::span<const double> neg,
                                 double fpr_budget) {
  if (pos.empty() || neg.empty()) {
    throw Error(ErrorCode::EmptyInput, "tpr_at_fpr needs non-empty positive and negative scores");
  }
  if (!(fpr_budget >= 0.0 && fpr_budget <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "fpr_budget must lie in [0, 1]");
  }
  std::vector<double> sorted_neg(neg.begin(), neg.end());
  std::vector<double> sorted_pos(pos.begin(), pos.end());
  std::sort(sorted_neg.begin(), sorted_neg.end());
  std::sort(sorted_pos.begin(), sorted_pos.end());
  std::vector<double> candidates = sorted_neg;
  candidates.insert(candidates.end(), sorted_pos.begin(), sorted_pos.end());
  candidates.push_back(std::numeric_limits<double>::infinity());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  auto fraction_at_least = [](const std::vector<double>& sorted, double t) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
  };

  DetectionStats stats;
  stats.fpr_budget = fpr_budget;
  stats.n_pos = pos.size();
  stats.n_neg = neg.size();
  for (double t : candidates) {
    const double fpr = fraction_at_least(sorted_neg, t);
    if (fpr <= fpr_budget) {
      stats.threshold = t;
      stats.fpr = fpr;
      stats.tpr = fraction_at_least(sorted_pos, t);
      break;
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Composite quality score
// ---------------------------------------------------------------------------

struct QualityVector {
  double fid = 0.0;
  double clipfid = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double nmi = 0.0;
  double lpips = 0.0;
  double delta_aesthetics = 0.0;
  double delta_artifacts = 0.0;

  std::array<double, 8> as_array() const {
    return {fid, clipfid, psnr, ssim, nmi, lpips, delta_aesthetics, delta_artifacts};
  }

  friend QualityVector operator+(const QualityVector& a, const QualityVector& b) {
    return {a.fid + b.fid,
            a.clipfid + b.clipfid,
            a.psnr + b.psnr,
            a.ssim + b.ssim,
            a.nmi + b.nmi,
            a.lpips + b.lpips,
            a.delta_aesthetics + b.delta_aesthetics,
            a.delta_artifacts + b.delta_artifacts};
  }
};

/// Published competition coefficients.
struct QualityWeights {
  double fid = 1.53e-3;
  double clipfid = 5.07e-3;
  double psnr = -2.22e-3;
  double ssim = -1.13e-1;
  double nmi = -9.88e-2;
  double lpips = 3.41e-1;
  double delta_aesthetics = 4.50e-2;
  double delta_artifacts = -1.44e-1;

  std::array<double, 8> as_array() const {
    return {fid, clipfid, psnr, ssim, nmi, lpips, delta_aesthetics, delta_artifacts};
  }
};

/// Weighted sum of the eight quality measures. PSNR must already be finite
/// (cap the identical-image sentinel with capped_psnr first).
inline double q_score(const QualityVector& v, const QualityWeights& w = {}) {
  const auto values = v.as_array();
  const auto weights = w.as_array();
  double q = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || !std::isfinite(weights[i])) {
      throw Error(ErrorCode::NonFiniteValue, "q_score input must be finite");
    }
    q += weights[i] * values[i];
  }
  return q;
}

inline double overall_score(double a, double q) { return std::hypot(a, q); }

// ---------------------------------------------------------------------------
// External (neural) metrics sidecar
// ---------------------------------------------------------------------------

inline constexpr std::array<const char*, 5> kExternalMetricNames = {
    "fid", "clipfid", "lpips", "delta_aesthetics", "delta_artifacts"};

/// Subset of the five externally computed metrics supplied for one image.
struct PartialExternalMetrics {
  std::array<std::optional<double>, 5> values;
};

/// Externally computed metrics resolved for one image; missing fields are 0
/// and flagged as defaulted.
struct ExternalMetrics {
  std::array<double, 5> values{};
  std::array<bool, 5> defaulted{true, true, true, true, true};

  double fid() const { return values[0]; }
  double clipfid() const { return values[1]; }
  double lpips() const { return values[2]; }
  double delta_aesthetics() const { return values[3]; }
  double delta_artifacts() const { return values[4]; }
};

/// Sidecar contents keyed by image id. The id "*" holds set-level values
/// applied to every image; per-image entries override them field by field.
class ExternalMetricTable {
 public:
  inline static const std::string kSetLevelId = "*";

  ExternalMetricTable() = default;
  explicit ExternalMetricTable(std::map<std::string, PartialExternalMetrics> entries)
      : entries_(std::move(entries)) {}

  ExternalMetrics lookup(const std::string& id) const {
    ExternalMetrics out;
    auto apply = [&out](const PartialExternalMetrics& partial) {
      for (std::size_t i = 0; i < partial.values.size(); ++i) {
        if (partial.values[i]) {
          out.values[i] = *partial.values[i];
          out.defaulted[i] = false;
        }
      }
    };
    if (auto it = entries_.find(kSetLevelId); it != entries_.end()) apply(it->second);
    if (auto it = entries_.find(id); it != entries_.end()) apply(it->second);
    return out;
  }

  const std::map<std::string, PartialExternalMetrics>& entries() const { return entries_; }

 private:
  std::map<std::string, PartialExternalMetrics> entries_;
};

inline ExternalMetricTable parse_external_metrics(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::MalformedJson, "external metrics sidecar must be a JSON object");
  }
  std::map<std::string, PartialExternalMetrics> entries;
  for (const auto& [id, fields] : doc.items()) {
    if (!fields.is_object()) {
      throw Error(ErrorCode::MalformedJson, "entry '" + id + "' must be an object");
    }
    PartialExternalMetrics partial;
    for (const auto& [name, value] : fields.items()) {
      const auto it = std::find_if(kExternalMetricNames.begin(), kExternalMetricNames.end(),
                                   [&](const char* known) { return name == known; });
      if (it == kExternalMetricNames.end()) {
        throw Error(ErrorCode::UnknownField, "'" + name + "' in entry '" + id + "'");
      }
      if (!value.is_number()) {
        throw Error(ErrorCode::MalformedJson, "'" + name + "' in entry '" + id + "' is not a number");
      }
      const double v = value.get<double>();
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteValue, "'" + name + "' in entry '" + id + "'");
      }
      partial.values[static_cast<std::size_t>(it - kExternalMetricNames.begin())] = v;
    }
    entries.emplace(id, partial);
  }
  return ExternalMetricTable(std::move(entries));
}

inline ExternalMetricTable load_external_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::MalformedJson, path.string());
  return parse_external_metrics(doc);
}

}  // namespace wmattack
