// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/ablation.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "c2f/errors.h"

namespace c2f {

namespace fs = std::filesystem;

RunConfig variant_config(const RunConfig& base, const std::string& variant) {
  RunConfig c = base;
  const bool gan = variant[0] == 'G';
  const bool multi = variant.find("+M") != std::string::npos;
  const bool perceptual = variant.find("+P") != std::string::npos;
  if (variant != "D" && variant != "D+M" && variant != "G" && variant != "G+M" && variant != "G+M+P") {
    throw ConfigError(fmt::format("ablate: unknown variant '{}'", variant));
  }
  c.train.mode = gan ? TrainMode::kGan : TrainMode::kDiscriminative;
  if (multi) {
    if (c.train.granularity.mode == GranularityMode::kConstant) c.train.granularity.mode = GranularityMode::kEpochStep;
  } else {
    c.train.granularity.mode = GranularityMode::kConstant;
  }
  c.train.dpl.enabled = perceptual;
  return c;
}

std::vector<std::pair<std::string, std::string>> controlled_pairs(const std::vector<std::string>& variants) {
  auto has = [&](const char* v) { return std::find(variants.begin(), variants.end(), v) != variants.end(); };
  std::vector<std::pair<std::string, std::string>> pairs;
  if (has("D") && has("D+M")) pairs.emplace_back("D", "D+M");
  if (has("G") && has("G+M")) pairs.emplace_back("G", "G+M");
  if (has("G+M") && has("G+M+P")) pairs.emplace_back("G+M", "G+M+P");
  return pairs;
}

namespace {

void write_lines(const fs::path& path, const std::vector<std::string>& header, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& h : header) out << "# " << h << '\n';
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::string file_tag(const std::string& variant) {
  std::string s = variant;
  std::replace(s.begin(), s.end(), '+', '_');
  return s;
}

}  // namespace

AblationResult run_ablation(const RunConfig& base, const fs::path& dataset, const fs::path& out) {
  base.validate();
  AblationResult result;
  result.pairs = controlled_pairs(base.ablate.variants);
  std::vector<std::string> diff_lines;
  for (const auto& [a, b] : result.pairs) {
    const auto diff = config_diff(variant_config(base, a), variant_config(base, b));
    diff_lines.push_back(fmt::format("{} vs {}: {}", a, b, diff.empty() ? "(none)" : fmt::format("{}", fmt::join(diff, " "))));
    if (diff.size() != 1) {
      throw ConfigError(fmt::format("ablate: {} and {} differ in {} keys, expected exactly one", a, b, diff.size()));
    }
    result.pair_diffs.push_back(diff[0]);
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (!fs::is_directory(out)) throw IoError(fmt::format("cannot create '{}'", out.string()));
  const std::vector<std::string> prov = provenance(base, base.train.seed);
  write_lines(out / "config_diff.txt", prov, diff_lines);

  const Manifest train_manifest = read_manifest(dataset / "train" / "manifest.jsonl");
  const Manifest test_manifest = read_manifest(dataset / "test" / "manifest.jsonl");
  const std::vector<LoadedPair> train_pairs = load_pairs(train_manifest);
  const TrainingSet data = make_training_set(train_pairs, base.train.slice_len, base.train.slice_stride);
  EvalOptions eval;
  eval.ssnr = base.ssnr;
  eval.stft = base.train.stft;
  eval.threads = base.eval_threads;

  for (const auto& variant : base.ablate.variants) {
    for (std::uint64_t seed : base.ablate.seeds) {
      RunConfig rc = variant_config(base, variant);
      rc.train.seed = seed;
      spdlog::info("ablate: {} seed {}", variant, seed);
      const auto t0 = std::chrono::steady_clock::now();
      double final_ssnr = 0.0, noisy_ssnr = 0.0;
      auto score = [&](int epoch, const ParamSet& gen) {
        const TrainConfig& tc = rc.train;
        const MetricsReport r =
            evaluate_set([&](const AudioBuffer& y) { return enhance(tc, gen, y); }, test_manifest, eval);
        result.curves.push_back(CurvePoint{variant, seed, epoch, r.mean.ssnr});
        final_ssnr = r.mean.ssnr;
        noisy_ssnr = r.mean.noisy_ssnr;
      };
      TrainHooks hooks;
      const int every = base.ablate.eval_every;
      hooks.on_epoch = [&](int epoch, const ParamSet& gen) {
        const bool last = epoch + 1 == rc.train.epochs;
        if (last || (every > 0 && (epoch + 1) % every == 0)) score(epoch, gen);
      };
      const TrainResult tr = train(rc.train, data, hooks);
      std::vector<std::string> hist{history_csv_header()};
      for (const auto& row : tr.history) hist.push_back(history_csv_row(row));
      write_lines(out / fmt::format("history_{}_seed{}.csv", file_tag(variant), seed), provenance(rc, seed), hist);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.runs.push_back(AblationRun{variant, seed, final_ssnr, noisy_ssnr, secs});
      spdlog::info("ablate: {} seed {} final SSNR {:.3f} dB (noisy {:.3f}) in {:.1f}s", variant, seed, final_ssnr,
                   noisy_ssnr, secs);
    }
  }

  std::vector<std::string> curve_lines{"variant,seed,epoch,ssnr_db"};
  for (const auto& c : result.curves) curve_lines.push_back(fmt::format("{},{},{},{}", c.variant, c.seed, c.epoch, c.ssnr));
  write_lines(out / "curves.csv", prov, curve_lines);

  std::vector<std::string> run_lines{"variant,seed,final_ssnr_db,noisy_ssnr_db"};
  for (const auto& r : result.runs) {
    run_lines.push_back(fmt::format("{},{},{},{}", r.variant, r.seed, r.final_ssnr, r.noisy_ssnr));
  }
  write_lines(out / "runs.csv", prov, run_lines);

  // Table layout: one row per method; only SSNR is computed here.
  std::vector<std::string> table{"method,pesq,csig,cbak,covl,ssnr_db"};
  if (!result.runs.empty()) table.push_back(fmt::format("Noisy,,,,,{}", result.runs.front().noisy_ssnr));
  for (const auto& variant : base.ablate.variants) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : result.runs) {
      if (r.variant == variant) {
        sum += r.final_ssnr;
        ++n;
      }
    }
    if (n > 0) table.push_back(fmt::format("{},,,,,{}", variant, sum / static_cast<double>(n)));
  }
  write_lines(out / "table.csv", prov, table);
  return result;
}

}  // namespace c2f
