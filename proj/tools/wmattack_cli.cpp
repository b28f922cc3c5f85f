// Command-line front end: embed, extract, attack, distort, eval, score, corpus.
// Machine-readable JSON goes to stdout, diagnostics to stderr.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "wmattack/wmattack.hpp"

namespace {

using namespace wmattack;
using ojson = nlohmann::ordered_json;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CodecFlags {
  std::uint64_t key = 0;
  double strength = EmbedConfig{}.strength;
  int payload_bits = EmbedConfig{}.payload_bits;
  int chips_per_bit = EmbedConfig{}.chips_per_bit;
  std::string ecc = EmbedConfig{}.ecc.to_string();
  double rejection = EmbedConfig{}.rejection;
  std::string mid_band;

  void attach(CLI::App* app) {
    app->add_option("--key", key, "secret key seed")->required();
    app->add_option("--strength", strength, "chip amplitude in DCT units")->capture_default_str();
    app->add_option("--payload-bits", payload_bits, "payload length in bits")->capture_default_str();
    app->add_option("--chips-per-bit", chips_per_bit, "chips per coded bit")->capture_default_str();
    app->add_option("--ecc", ecc, "none | repetition:<r>")->capture_default_str();
    app->add_option("--rejection", rejection, "host rejection bound (multiples of strength)")
        ->capture_default_str();
    app->add_option("--mid-band", mid_band, "comma-separated zig-zag indices (default 6..15)");
  }

  EmbedConfig config() const {
    EmbedConfig cfg;
    cfg.strength = strength;
    cfg.payload_bits = payload_bits;
    cfg.chips_per_bit = chips_per_bit;
    cfg.ecc = Ecc::parse(ecc);
    cfg.rejection = rejection;
    if (!mid_band.empty()) {
      cfg.mid_band.clear();
      std::stringstream ss(mid_band);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          cfg.mid_band.push_back(std::stoi(item));
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidArgument, "bad --mid-band entry '" + item + "'");
        }
      }
    }
    cfg.validate();
    return cfg;
  }
};

void print(const ojson& j) { std::cout << dump_json(j); }

ojson decode_json(const DecodeResult& d) {
  ojson j;
  j["payload"] = d.bits.to_hex();
  j["mean_confidence"] = d.mean_confidence;
  j["confidences"] = d.confidences;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Watermark overwrite attack and evaluation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "embed a payload into a PNG");
  std::string embed_in, embed_out, embed_payload;
  CodecFlags embed_flags;
  embed_cmd->add_option("--in", embed_in, "input PNG")->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("--out", embed_out, "output PNG")->required();
  embed_cmd->add_option("--payload", embed_payload, "payload hex (default: keyed random)");
  embed_flags.attach(embed_cmd);

  // extract
  auto* extract_cmd = app.add_subcommand("extract", "blind-decode the payload of a PNG");
  std::string extract_in;
  CodecFlags extract_flags;
  extract_cmd->add_option("--in", extract_in, "input PNG")->required()->check(CLI::ExistingFile);
  extract_flags.attach(extract_cmd);

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "overwrite attack: decode, invert, re-embed");
  std::string attack_in, attack_out, attack_diff;
  double attack_gain = 10.0;
  CodecFlags attack_flags;
  attack_cmd->add_option("--in", attack_in, "watermarked PNG")->required()->check(CLI::ExistingFile);
  attack_cmd->add_option("--out", attack_out, "attacked PNG")->required();
  attack_cmd->add_option("--diff", attack_diff, "optional difference image PNG");
  attack_cmd->add_option("--diff-gain", attack_gain, "difference amplification")->capture_default_str();
  attack_flags.attach(attack_cmd);

  // distort
  auto* distort_cmd = app.add_subcommand("distort", "apply a distortion chain");
  std::string distort_in, distort_out, distort_chain;
  distort_cmd->add_option("--in", distort_in, "input PNG")->required()->check(CLI::ExistingFile);
  distort_cmd->add_option("--out", distort_out, "output PNG")->required();
  distort_cmd->add_option("--chain", distort_chain, "comma-separated kind:param[:seed] atoms")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "run the batch pipeline from a JSON config");
  std::string eval_config;
  int eval_workers = 0;
  eval_cmd->add_option("--config", eval_config, "run config JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--workers", eval_workers, "override worker count");

  // score
  auto* score_cmd = app.add_subcommand("score", "overall score sqrt(A^2 + Q^2)");
  double score_a = 0.0, score_q = 0.0;
  score_cmd->add_option("--a", score_a, "removal accuracy A")->required()->check(CLI::Range(0.0, 1.0));
  score_cmd->add_option("--q", score_q, "quality score Q")->required();

  // corpus
  auto* corpus_cmd = app.add_subcommand("corpus", "write a synthetic test corpus");
  std::string corpus_out;
  int corpus_count = 150, corpus_size = 256;
  std::uint64_t corpus_seed = 1;
  corpus_cmd->add_option("--out", corpus_out, "output directory")->required();
  corpus_cmd->add_option("--count", corpus_count, "number of images")->capture_default_str()->check(CLI::PositiveNumber);
  corpus_cmd->add_option("--size", corpus_size, "side length in pixels")->capture_default_str()->check(CLI::Range(16, 8192));
  corpus_cmd->add_option("--seed", corpus_seed, "corpus seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*embed_cmd) {
      const EmbedConfig cfg = embed_flags.config();
      const RasterImage img = load_png(embed_in);
      const Payload payload =
          embed_payload.empty()
              ? Payload::random(static_cast<std::size_t>(cfg.payload_bits), derive_seed(embed_flags.key, "payload:cli"))
              : Payload::from_hex(embed_payload, static_cast<std::size_t>(cfg.payload_bits));
      const RasterImage out = embed(img, payload, SecretKey{embed_flags.key}, cfg);
      save_png(out, embed_out);
      ojson j;
      j["payload"] = payload.to_hex();
      j["psnr"] = capped_psnr(psnr(out, img));
      print(j);
    } else if (*extract_cmd) {
      const EmbedConfig cfg = extract_flags.config();
      print(decode_json(extract(load_png(extract_in), SecretKey{extract_flags.key}, cfg)));
    } else if (*attack_cmd) {
      const EmbedConfig cfg = attack_flags.config();
      const RasterImage watermarked = load_png(attack_in);
      const AttackTrace trace = overwrite_attack(watermarked, SecretKey{attack_flags.key}, cfg);
      save_png(trace.attacked_image, attack_out);
      if (!attack_diff.empty()) save_png(diff_image(trace.attacked_image, watermarked, attack_gain), attack_diff);
      ojson j;
      j["recovered"] = decode_json(trace.recovered);
      j["inverted"] = trace.inverted.to_hex();
      j["residual_accuracy"] = trace.residual_accuracy;
      j["psnr"] = capped_psnr(psnr(trace.attacked_image, watermarked));
      j["ssim"] = ssim(trace.attacked_image, watermarked);
      print(j);
    } else if (*distort_cmd) {
      std::vector<Distortion> chain;
      try {
        chain = parse_chain(distort_chain);
      } catch (const Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
      }
      const RasterImage img = load_png(distort_in);
      const RasterImage out = compose(chain, img);
      save_png(out, distort_out);
      ojson j;
      j["chain"] = chain_to_string(chain);
      j["psnr"] = capped_psnr(psnr(out, img));
      print(j);
    } else if (*eval_cmd) {
      RunConfig cfg;
      try {
        std::ifstream in(eval_config);
        nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
        if (doc.is_discarded()) throw Error(ErrorCode::MalformedJson, eval_config);
        cfg = parse_run_config(doc, std::filesystem::path(eval_config).parent_path());
        if (eval_workers > 0) cfg.workers = eval_workers;
        cfg.validate();
      } catch (const Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
      }
      const RunReport report = run_pipeline(cfg);
      if (report.failed > 0) std::cerr << report.failed << " image(s) failed; see report rows\n";
      print(report.to_json());
    } else if (*score_cmd) {
      std::cout << nlohmann::json(overall_score(score_a, score_q)).dump() << "\n";
    } else if (*corpus_cmd) {
      std::filesystem::create_directories(corpus_out);
      for (int i = 0; i < corpus_count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "img%04d.png", i);
        save_png(synthetic_image(corpus_size, corpus_size, corpus_seed * 1000003ULL + static_cast<std::uint64_t>(i)),
                 std::filesystem::path(corpus_out) / name);
      }
      ojson j;
      j["out"] = corpus_out;
      j["count"] = corpus_count;
      print(j);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::MissingFile ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
