#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "wmattack/attack.hpp"
#include "wmattack/codec.hpp"
#include "wmattack/distortions.hpp"
#include "wmattack/error.hpp"
#include "wmattack/json_writer.hpp"
#include "wmattack/metrics.hpp"
#include "wmattack/png_io.hpp"
#include "wmattack/version.hpp"

namespace wmattack {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path input_dir;
  fs::path output_dir;
  SecretKey key{};
  /// Fixed payload for every image; when empty, each image gets a keyed
  /// random payload derived from the key and its id.
  std::optional<std::string> payload_hex;
  EmbedConfig embed;
  std::vector<Distortion> distortions;
  double fpr_budget = 0.001;
  std::optional<fs::path> external_metrics;
  /// Clean images scored as negatives; switches A to the empirical threshold.
  std::optional<fs::path> clean_dir;
  double diff_gain = 10.0;
  /// Throughput knob only; never affects the report.
  int workers = 1;
  bool write_images = true;

  void validate() const {
    embed.validate();
    if (!(fpr_budget > 0.0 && fpr_budget < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "fpr_budget must lie in (0, 1)");
    }
    if (!(diff_gain > 0.0)) throw Error(ErrorCode::InvalidArgument, "diff_gain must be positive");
    if (workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
    for (const auto& d : distortions) d.validate();
    if (payload_hex) Payload::from_hex(*payload_hex, static_cast<std::size_t>(embed.payload_bits));
    if (!fs::is_directory(input_dir)) throw Error(ErrorCode::MissingFile, "input_dir " + input_dir.string());
    if (clean_dir && !fs::is_directory(*clean_dir))
      throw Error(ErrorCode::MissingFile, "clean_dir " + clean_dir->string());
    if (external_metrics && !fs::is_regular_file(*external_metrics))
      throw Error(ErrorCode::MissingFile, "external_metrics " + external_metrics->string());
  }
};

/// Config file keys. Relative paths resolve against `base_dir`.
inline RunConfig parse_run_config(const nlohmann::json& doc, const fs::path& base_dir = {}) {
  if (!doc.is_object()) throw Error(ErrorCode::MalformedJson, "run config must be a JSON object");
  static const std::vector<std::string> kKnown = {
      "input_dir", "output_dir", "key", "payload", "strength", "payload_bits", "chips_per_bit",
      "ecc", "mid_band", "rejection", "distortions", "fpr_budget", "external_metrics",
      "clean_dir", "diff_gain", "workers", "write_images"};
  for (const auto& [name, _] : doc.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), name) == kKnown.end()) {
      throw Error(ErrorCode::UnknownField, "'" + name + "' in run config");
    }
  }
  auto path_of = [&](const char* name) {
    fs::path p = doc.at(name).get<std::string>();
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  RunConfig cfg;
  try {
    if (!doc.contains("input_dir") || !doc.contains("output_dir")) {
      throw Error(ErrorCode::InvalidArgument, "run config needs input_dir and output_dir");
    }
    cfg.input_dir = path_of("input_dir");
    cfg.output_dir = path_of("output_dir");
    cfg.key.seed = doc.value("key", std::uint64_t{0});
    if (doc.contains("payload")) {
      const auto payload = doc.at("payload").get<std::string>();
      if (payload != "random") cfg.payload_hex = payload;
    }
    cfg.embed.strength = doc.value("strength", cfg.embed.strength);
    cfg.embed.payload_bits = doc.value("payload_bits", cfg.embed.payload_bits);
    cfg.embed.chips_per_bit = doc.value("chips_per_bit", cfg.embed.chips_per_bit);
    if (doc.contains("ecc")) cfg.embed.ecc = Ecc::parse(doc.at("ecc").get<std::string>());
    if (doc.contains("mid_band")) cfg.embed.mid_band = doc.at("mid_band").get<std::vector<int>>();
    cfg.embed.rejection = doc.value("rejection", cfg.embed.rejection);
    if (doc.contains("distortions")) cfg.distortions = parse_chain(doc.at("distortions").get<std::string>());
    cfg.fpr_budget = doc.value("fpr_budget", cfg.fpr_budget);
    if (doc.contains("external_metrics")) cfg.external_metrics = path_of("external_metrics");
    if (doc.contains("clean_dir")) cfg.clean_dir = path_of("clean_dir");
    cfg.diff_gain = doc.value("diff_gain", cfg.diff_gain);
    cfg.workers = doc.value("workers", cfg.workers);
    cfg.write_images = doc.value("write_images", cfg.write_images);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedJson, std::string("run config: ") + e.what());
  }
  return cfg;
}

/// Config echo for the report. Worker count is deliberately absent so the
/// report does not depend on it.
inline nlohmann::ordered_json run_config_echo(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["input_dir"] = cfg.input_dir.generic_string();
  j["output_dir"] = cfg.output_dir.generic_string();
  j["key"] = cfg.key.seed;
  j["payload"] = cfg.payload_hex.value_or("random");
  j["strength"] = cfg.embed.strength;
  j["payload_bits"] = cfg.embed.payload_bits;
  j["chips_per_bit"] = cfg.embed.chips_per_bit;
  j["ecc"] = cfg.embed.ecc.to_string();
  j["mid_band"] = cfg.embed.mid_band;
  j["rejection"] = cfg.embed.rejection;
  j["distortions"] = chain_to_string(cfg.distortions);
  j["fpr_budget"] = cfg.fpr_budget;
  j["external_metrics"] = cfg.external_metrics ? nlohmann::ordered_json(cfg.external_metrics->generic_string())
                                               : nlohmann::ordered_json(nullptr);
  j["clean_dir"] = cfg.clean_dir ? nlohmann::ordered_json(cfg.clean_dir->generic_string())
                                 : nlohmann::ordered_json(nullptr);
  j["diff_gain"] = cfg.diff_gain;
  j["psnr_cap_db"] = kPsnrCap;
  return j;
}

struct ImageRow {
  std::string id;
  bool ok = false;
  std::string error;
  std::string payload_hex;
  std::string recovered_hex;
  std::string inverted_hex;
  double recovered_confidence = 0.0;
  /// Decode of the watermarked image vs the true payload (pre-attack).
  double accuracy_watermarked = 0.0;
  /// Decode of the attacked (and distorted) image vs the true payload.
  double accuracy_attacked = 0.0;
  double residual_accuracy = 0.0;
  std::size_t matches_watermarked = 0;
  std::size_t matches_attacked = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double nmi = 0.0;
  ExternalMetrics external;

  QualityVector quality() const {
    return {external.fid(),   external.clipfid(), capped_psnr(psnr),
            ssim,             nmi,                external.lpips(),
            external.delta_aesthetics(), external.delta_artifacts()};
  }
};

struct RunReport {
  nlohmann::ordered_json config;
  std::string detection_mode;  // "binomial" or "empirical"
  double detection_threshold = 0.0;
  std::size_t processed = 0;
  std::size_t failed = 0;
  std::size_t negatives = 0;
  std::optional<double> a;
  std::optional<double> a_watermarked;
  std::optional<double> q;
  std::optional<double> overall;
  QualityVector mean_quality;
  std::vector<ImageRow> images;

  nlohmann::ordered_json to_json() const;
};

inline nlohmann::ordered_json RunReport::to_json() const {
  using oj = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? oj(*v) : oj(nullptr); };
  oj j;
  j["config"] = config;
  j["version"] = kVersion;
  j["A"] = opt(a);
  j["Q"] = opt(q);
  j["overall"] = opt(overall);
  oj detection;
  detection["mode"] = detection_mode;
  detection["threshold"] = detection_threshold;
  detection["A_watermarked"] = opt(a_watermarked);
  detection["negatives"] = negatives;
  j["detection"] = detection;
  j["processed"] = processed;
  j["failed"] = failed;
  oj mean;
  mean["fid"] = mean_quality.fid;
  mean["clipfid"] = mean_quality.clipfid;
  mean["psnr"] = mean_quality.psnr;
  mean["ssim"] = mean_quality.ssim;
  mean["nmi"] = mean_quality.nmi;
  mean["lpips"] = mean_quality.lpips;
  mean["delta_aesthetics"] = mean_quality.delta_aesthetics;
  mean["delta_artifacts"] = mean_quality.delta_artifacts;
  j["mean_quality"] = mean;
  oj rows = oj::array();
  for (const auto& r : images) {
    oj row;
    row["id"] = r.id;
    row["status"] = r.ok ? "ok" : "failed";
    if (!r.ok) {
      row["error"] = r.error;
      rows.push_back(row);
      continue;
    }
    row["payload"] = r.payload_hex;
    row["recovered"] = r.recovered_hex;
    row["inverted"] = r.inverted_hex;
    row["recovered_confidence"] = r.recovered_confidence;
    row["bit_accuracy_watermarked"] = r.accuracy_watermarked;
    row["bit_accuracy_attacked"] = r.accuracy_attacked;
    row["residual_accuracy"] = r.residual_accuracy;
    row["matches_watermarked"] = r.matches_watermarked;
    row["matches_attacked"] = r.matches_attacked;
    row["psnr"] = capped_psnr(r.psnr);
    row["psnr_capped"] = r.psnr > kPsnrCap;
    row["ssim"] = r.ssim;
    row["nmi"] = r.nmi;
    oj ext;
    oj defaulted = oj::array();
    for (std::size_t i = 0; i < kExternalMetricNames.size(); ++i) {
      ext[kExternalMetricNames[i]] = r.external.values[i];
      if (r.external.defaulted[i]) defaulted.push_back(kExternalMetricNames[i]);
    }
    row["external"] = ext;
    row["defaulted"] = defaulted;
    rows.push_back(row);
  }
  j["images"] = rows;
  return j;
}

/// PNG files directly inside `dir`, sorted by file name.
inline std::vector<fs::path> list_pngs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

inline Payload payload_for(const RunConfig& cfg, const std::string& id) {
  const auto n = static_cast<std::size_t>(cfg.embed.payload_bits);
  if (cfg.payload_hex) return Payload::from_hex(*cfg.payload_hex, n);
  return Payload::random(n, derive_seed(cfg.key.seed, "payload:" + id));
}

/// Runs `task(i)` for i in [0, count) on up to `workers` threads. Each index
/// runs exactly once; results must be written to per-index slots.
template <typename Task>
void parallel_for(std::size_t count, int workers, Task&& task) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) task(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline ImageRow process_image(const RunConfig& cfg, const fs::path& file,
                              const ExternalMetricTable& external) {
  ImageRow row;
  row.id = file.stem().string();
  try {
    const RasterImage original = load_png(file);
    const Payload payload = payload_for(cfg, row.id);
    const RasterImage watermarked = embed(original, payload, cfg.key, cfg.embed);
    const DecodeResult before = extract(watermarked, cfg.key, cfg.embed);

    AttackTrace trace = overwrite_attack(watermarked, cfg.key, cfg.embed);
    const RasterImage attacked = compose(cfg.distortions, trace.attacked_image);
    const DecodeResult after = extract(attacked, cfg.key, cfg.embed);

    row.payload_hex = payload.to_hex();
    row.recovered_hex = trace.recovered.bits.to_hex();
    row.inverted_hex = trace.inverted.to_hex();
    row.recovered_confidence = trace.recovered.mean_confidence;
    row.matches_watermarked = matching_bits(before.bits, payload);
    row.matches_attacked = matching_bits(after.bits, payload);
    row.accuracy_watermarked = bit_accuracy(before.bits, payload);
    row.accuracy_attacked = bit_accuracy(after.bits, payload);
    row.residual_accuracy = trace.residual_accuracy;
    row.psnr = psnr(attacked, watermarked);
    row.ssim = ssim(attacked, watermarked);
    row.nmi = nmi(attacked, watermarked);
    row.external = external.lookup(row.id);

    if (cfg.write_images) {
      save_png(watermarked, cfg.output_dir / (row.id + ".watermarked.png"));
      save_png(attacked, cfg.output_dir / (row.id + ".attacked.png"));
      save_png(diff_image(attacked, watermarked, cfg.diff_gain), cfg.output_dir / (row.id + ".diff.png"));
    }
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  return row;
}

/// Embed, attack, optionally distort and score every PNG in input_dir.
/// Writes per-image PNGs and report.json into output_dir.
inline RunReport run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  const auto files = list_pngs(cfg.input_dir);
  if (files.empty()) throw Error(ErrorCode::EmptyInput, "no PNG files in " + cfg.input_dir.string());
  const ExternalMetricTable external =
      cfg.external_metrics ? load_external_metrics(*cfg.external_metrics) : ExternalMetricTable{};
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (!fs::is_directory(cfg.output_dir)) throw Error(ErrorCode::UnwritablePath, cfg.output_dir.string());

  RunReport report;
  report.config = run_config_echo(cfg);
  report.images.resize(files.size());
  parallel_for(files.size(), cfg.workers,
               [&](std::size_t i) { report.images[i] = process_image(cfg, files[i], external); });

  // Ordered reduce over rows sorted by file name.
  std::vector<double> attacked_scores;
  std::vector<double> watermarked_scores;
  QualityVector sum;
  for (const auto& row : report.images) {
    if (!row.ok) {
      ++report.failed;
      continue;
    }
    ++report.processed;
    attacked_scores.push_back(static_cast<double>(row.matches_attacked));
    watermarked_scores.push_back(static_cast<double>(row.matches_watermarked));
    sum = sum + row.quality();
  }

  std::vector<double> negative_scores;
  if (cfg.clean_dir) {
    const auto clean = list_pngs(*cfg.clean_dir);
    negative_scores.assign(clean.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_for(clean.size(), cfg.workers, [&](std::size_t i) {
      try {
        const RasterImage img = load_png(clean[i]);
        const Payload payload = payload_for(cfg, clean[i].stem().string());
        negative_scores[i] = static_cast<double>(matching_bits(extract(img, cfg.key, cfg.embed).bits, payload));
      } catch (const std::exception&) {
      }
    });
    std::erase_if(negative_scores, [](double v) { return std::isnan(v); });
    report.negatives = negative_scores.size();
  }

  if (report.processed > 0) {
    const std::size_t n = report.processed;
    const double inv = 1.0 / static_cast<double>(n);
    report.mean_quality = {sum.fid * inv,   sum.clipfid * inv, sum.psnr * inv,
                           sum.ssim * inv,  sum.nmi * inv,     sum.lpips * inv,
                           sum.delta_aesthetics * inv, sum.delta_artifacts * inv};
    if (cfg.clean_dir && !negative_scores.empty()) {
      report.detection_mode = "empirical";
      const auto stats = tpr_at_fpr(attacked_scores, negative_scores, cfg.fpr_budget);
      report.detection_threshold = stats.threshold;
      report.a = stats.tpr;
      report.a_watermarked = tpr_at_fpr(watermarked_scores, negative_scores, cfg.fpr_budget).tpr;
    } else {
      report.detection_mode = "binomial";
      const int k = detection_threshold(cfg.embed.payload_bits, cfg.fpr_budget);
      report.detection_threshold = k;
      auto tpr = [k](const std::vector<double>& scores) {
        const auto hits = std::count_if(scores.begin(), scores.end(), [k](double s) { return s >= k; });
        return static_cast<double>(hits) / static_cast<double>(scores.size());
      };
      report.a = tpr(attacked_scores);
      report.a_watermarked = tpr(watermarked_scores);
    }
    report.q = q_score(report.mean_quality);
    report.overall = overall_score(*report.a, *report.q);
  } else {
    report.detection_mode = cfg.clean_dir ? "empirical" : "binomial";
  }

  std::ofstream out(cfg.output_dir / "report.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::UnwritablePath, (cfg.output_dir / "report.json").string());
  out << dump_json(report.to_json());
  return report;
}

}  // namespace wmattack
