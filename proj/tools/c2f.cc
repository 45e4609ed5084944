// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// c2f: data synthesis, training, enhancement, evaluation and ablation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "c2f/ablation.h"
#include "c2f/config.h"
#include "c2f/errors.h"
#include "c2f/grad_check.h"
#include "c2f/hash.h"
#include "c2f/metrics.h"
#include "c2f/trainer.h"

namespace fs = std::filesystem;
using namespace c2f;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumeric = 4, kIo = 5 };

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "INI config file (defaults when omitted)");
  app->add_option("--set", c.overrides, "Override as section.key=value (repeatable)");
}

RunConfig resolve(const Common& c) {
  std::vector<std::string> o = c.overrides;
  if (c.threads) o.push_back(fmt::format("eval.threads={}", *c.threads));
  return load_config(c.config.empty() ? fs::path() : fs::path(c.config), o);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::string file_id(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw IoError(fmt::format("cannot create directory '{}'", dir.string()));
}

int run_synth(const Common& c, const std::string& out) {
  RunConfig cfg = resolve(c);
  if (c.seed) cfg.data.seed = *c.seed;
  cfg.validate();
  ensure_dir(out);
  const SynthSummary s = synth_dataset(cfg.data, out, provenance(cfg, cfg.data.seed));
  std::printf("train pairs %zu -> %s\ntest pairs %zu -> %s\n", s.train_pairs, s.train_manifest.c_str(),
              s.test_pairs, s.test_manifest.c_str());
  return kOk;
}

int run_train(const Common& c, const std::string& mode, const std::string& data, const std::string& manifest,
              const std::string& out) {
  RunConfig cfg = resolve(c);
  if (!mode.empty()) cfg.train.mode = parse_train_mode(mode);
  if (c.seed) cfg.train.seed = *c.seed;
  cfg.validate();
  ensure_dir(out);
  const fs::path m = manifest.empty() ? fs::path(data) / "train" / "manifest.jsonl" : fs::path(manifest);
  const TrainingSet set =
      make_training_set(load_pairs(read_manifest(m)), cfg.train.slice_len, cfg.train.slice_stride);
  spdlog::info("training on {} slices from {}", set.size(), m.string());
  const TrainResult r = train(cfg.train, set);
  const auto prov = provenance(cfg, cfg.train.seed);
  save_checkpoint(fs::path(out) / "checkpoint.c2f", r.checkpoint);
  std::string hist;
  for (const auto& p : prov) hist += "# " + p + "\n";
  hist += history_csv_header() + "\n";
  for (const auto& row : r.history) hist += history_csv_row(row) + "\n";
  write_text(fs::path(out) / "history.csv", hist);
  std::string ini;
  for (const auto& p : prov) ini += "# " + p + "\n";
  write_text(fs::path(out) / "config.ini", ini + to_ini(cfg));
  std::printf("checkpoint %s\nfinal epoch loss %.6f\n", (fs::path(out) / "checkpoint.c2f").c_str(),
              r.epoch_losses.back());
  return kOk;
}

int run_enhance(const std::string& ckpt, const std::string& in, const std::string& out, bool pcm16) {
  const Checkpoint ck = load_checkpoint(ckpt);
  const AudioBuffer noisy = read_wav(in);
  const AudioBuffer enhanced = enhance(ck, noisy);
  const WavWriteStats st = write_wav(out, enhanced, pcm16 ? WavEncoding::kPcm16 : WavEncoding::kFloat32);
  std::printf("%zu samples -> %s (%zu clipped)\n", enhanced.size(), out.c_str(), st.clipped);
  return kOk;
}

int run_evaluate(const Common& c, const std::string& ckpt, const std::string& manifest, const std::string& out) {
  const Checkpoint ck = load_checkpoint(ckpt);
  RunConfig cfg = resolve(c);
  cfg.train = ck.config;
  EvalOptions opt;
  opt.ssnr = cfg.ssnr;
  opt.stft = ck.config.stft;
  opt.threads = cfg.eval_threads;
  MetricsReport report =
      evaluate_set([&](const AudioBuffer& y) { return enhance(ck, y); }, read_manifest(manifest), opt);
  report.checkpoint_id = file_id(ckpt);
  write_report(out, report, provenance(cfg, ck.config.seed));
  std::printf("pairs %zu (skipped %zu)\nSSNR %.4f dB (noisy %.4f)\nSNR %.4f dB (noisy %.4f)\nLSD %.4f dB (noisy %.4f)\n",
              report.rows.size(), report.skipped, report.mean.ssnr, report.mean.noisy_ssnr, report.mean.snr,
              report.mean.noisy_snr, report.mean.lsd, report.mean.noisy_lsd);
  return kOk;
}

int run_ablate(const Common& c, const std::string& variants, const std::string& data, const std::string& out) {
  std::vector<std::string> o = c.overrides;
  if (!variants.empty()) o.push_back("ablate.variants=" + variants);
  Common cc = c;
  cc.overrides = o;
  RunConfig cfg = resolve(cc);
  const AblationResult r = run_ablation(cfg, data, out);
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    std::printf("%s vs %s differ only in %s\n", r.pairs[i].first.c_str(), r.pairs[i].second.c_str(),
                r.pair_diffs[i].c_str());
  }
  std::printf("%-8s %6s %12s %12s\n", "variant", "seed", "ssnr_db", "noisy_db");
  for (const auto& run : r.runs) {
    std::printf("%-8s %6llu %12.4f %12.4f\n", run.variant.c_str(), static_cast<unsigned long long>(run.seed),
                run.final_ssnr, run.noisy_ssnr);
  }
  return kOk;
}

int run_grad_check(const std::string& op, int seeds) {
  std::vector<std::string> ops = op.empty() || op == "all" ? ag::grad_check_ops() : std::vector<std::string>{op};
  bool ok = true;
  std::printf("%-26s %12s %12s %10s %s\n", "op", "max_rel", "max_abs", "threshold", "status");
  for (const auto& name : ops) {
    double rel = 0.0, abs = 0.0, thr = 0.0;
    bool pass = true;
    for (int s = 1; s <= seeds; ++s) {
      const ag::GradCheckResult r = ag::grad_check(name, static_cast<std::uint64_t>(s));
      rel = std::max(rel, r.max_rel_error);
      abs = std::max(abs, r.max_abs_error);
      thr = r.threshold;
      pass = pass && r.passed();
    }
    ok = ok && pass;
    std::printf("%-26s %12.3e %12.3e %10.0e %s\n", name.c_str(), rel, abs, thr, pass ? "ok" : "FAIL");
  }
  if (!ok) throw NumericError("grad-check: at least one op exceeded its threshold");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Tape arrays are large and short-lived; keep them off mmap so each step
  // does not pay for fresh zeroed pages.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Coarse-to-fine speech enhancement toolkit"};
  app.require_subcommand(1);
  std::string level = "info";
  app.add_option("--log-level", level, "trace|debug|info|warn|error|off");

  Common synth_c, train_c, eval_c, ablate_c, print_c;
  std::string out, data = "data", mode, manifest, ckpt, in, variants, op;
  bool pcm16 = false;
  int seeds = 5;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic noisy/clean corpus");
  add_common(synth, synth_c);
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", seed, "Data seed (overrides data.seed)");

  auto* tr = app.add_subcommand("train", "Train a generator");
  add_common(tr, train_c);
  tr->add_option("--mode", mode, "disc|gan (overrides train.mode)");
  tr->add_option("--data", data, "Dataset directory from synth-data");
  tr->add_option("--manifest", manifest, "Training manifest (overrides --data)");
  tr->add_option("--out", out, "Output directory")->required();
  tr->add_option("--seed", seed, "Training seed (overrides train.seed)");

  auto* en = app.add_subcommand("enhance", "Enhance one WAV file");
  en->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  en->add_option("--in", in, "Noisy 16 kHz mono WAV")->required();
  en->add_option("--out", out, "Output WAV")->required();
  en->add_flag("--pcm16", pcm16, "Write 16-bit PCM instead of 32-bit float");

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a manifest");
  add_common(ev, eval_c);
  ev->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  ev->add_option("--manifest", manifest, "Manifest (JSON lines)")->required();
  ev->add_option("--out", out, "Report CSV")->required();
  ev->add_option("--threads", threads, "Parallel utterances");

  auto* ab = app.add_subcommand("ablate", "Single vs coarse-to-fine ablation");
  add_common(ab, ablate_c);
  ab->add_option("--variants", variants, "Comma list of D,D+M,G,G+M,G+M+P");
  ab->add_option("--data", data, "Dataset directory from synth-data");
  ab->add_option("--out", out, "Output directory")->required();
  ab->add_option("--threads", threads, "Parallel utterances during evaluation");

  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every differentiable op");
  gc->add_option("--op", op, "Single op name, or 'all'");
  gc->add_option("--seeds", seeds, "Seeds per op")->check(CLI::PositiveNumber);

  auto* pc = app.add_subcommand("print-config", "Print the resolved configuration");
  add_common(pc, print_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  spdlog::set_level(spdlog::level::from_str(level));

  try {
    if (synth->parsed()) {
      if (synth->count("--seed")) synth_c.seed = seed;
      return run_synth(synth_c, out);
    }
    if (tr->parsed()) {
      if (tr->count("--seed")) train_c.seed = seed;
      return run_train(train_c, mode, data, manifest, out);
    }
    if (en->parsed()) return run_enhance(ckpt, in, out, pcm16);
    if (ev->parsed()) {
      if (ev->count("--threads")) eval_c.threads = threads;
      return run_evaluate(eval_c, ckpt, manifest, out);
    }
    if (ab->parsed()) {
      if (ab->count("--threads")) ablate_c.threads = threads;
      return run_ablate(ablate_c, variants, data, out);
    }
    if (gc->parsed()) return run_grad_check(op, seeds);
    if (pc->parsed()) {
      std::cout << to_ini(resolve(print_c));
      return kOk;
    }
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const NumericError& e) {
    spdlog::error("numeric failure: {}", e.what());
    return kNumeric;
  } catch (const IoError& e) {
    spdlog::error("i/o error: {}", e.what());
    return kIo;
  } catch (const DataError& e) {
    spdlog::error("data error: {}", e.what());
    return kData;
  } catch (const ShapeError& e) {
    spdlog::error("data error: {}", e.what());
    return kData;
  } catch (const std::exception& e) {
    spdlog::error("error: {}", e.what());
    return kOther;
  }
  return kOther;
}
