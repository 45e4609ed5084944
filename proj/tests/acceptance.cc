// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
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
#include "c2f/losses.h"
#include "c2f/metrics.h"
#include "c2f/spectral.h"
#include "c2f/trainer.h"
#include "test_util.h"
#include "tiny_config.h"

using namespace c2f;
namespace fs = std::filesystem;
using ag::Array;
using ag::Shape;
using ag::Tape;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects failed sub-checks of one criterion.
struct Check {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

// ---------------------------------------------------------------------------

void stft_round_trip(Check& c) {
  StftConfig cfg(1024, 256);
  double worst = 0.0, slowest = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    AudioBuffer b;
    b.samples.resize(32000);
    for (double& v : b.samples) v = g(rng);
    const auto t0 = Clock::now();
    AudioBuffer r = istft(stft(b, cfg), cfg);
    const double sec = seconds_since(t0);
    // Interior: skip one window at each end, where the envelope is floored.
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1024; i + 1024 < r.size(); ++i) {
      num += (b.samples[i] - r.samples[i]) * (b.samples[i] - r.samples[i]);
      den += b.samples[i] * b.samples[i];
    }
    const double rel = std::sqrt(num / den);
    worst = std::max(worst, rel);
    slowest = std::max(slowest, sec);
    c.expect(rel < 1e-10, fmt::format("seed {} interior rel rms {:.3e}", seed, rel));
    c.expect(sec < 1.0, fmt::format("seed {} took {:.3f} s", seed, sec));
  }
  c.note(fmt::format("worst rel rms {:.2e}, slowest {:.3f} s", worst, slowest));
}

// ---------------------------------------------------------------------------

void gradient_suite(Check& c) {
  const auto t0 = Clock::now();
  double worst_rel = 0.0, generator_rel = 0.0;
  for (const std::string& op : ag::grad_check_ops()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ag::GradCheckResult r = ag::grad_check(op, seed);
      const double limit = op == "generator" ? 1e-3 : 1e-4;
      const bool ok = r.max_rel_error < std::min(limit, r.threshold) && r.max_abs_error < r.abs_threshold;
      c.expect(ok, fmt::format("{} seed {} rel {:.3e} abs {:.3e}", op, seed, r.max_rel_error, r.max_abs_error));
      if (op == "generator") generator_rel = std::max(generator_rel, r.max_rel_error);
      else worst_rel = std::max(worst_rel, r.max_rel_error);
    }
  }
  const double sec = seconds_since(t0);
  c.expect(sec < 300.0, fmt::format("suite took {:.1f} s", sec));
  c.note(fmt::format("{} ops, worst op rel {:.2e}, generator rel {:.2e}, {:.1f} s", ag::grad_check_ops().size(),
                     worst_rel, generator_rel, sec));
}

// ---------------------------------------------------------------------------

Array vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Array(Shape{n}, std::move(v));
}

double cos_value(const Array& a, const Array& b) {
  Tape t;
  return t.value(cosine_loss(t, t.constant(a), t.constant(b), CosineOptions::evaluation())).item();
}

double granular_value(const Array& a, const Array& b, std::size_t g) {
  Tape t;
  return t.value(granular_cosine_loss(t, t.constant(a), t.constant(b), g, CosineOptions::evaluation())).item();
}

double sn_value(const Array& xh, const Array& x, const Array& y, std::size_t g) {
  Tape t;
  return t.value(signal_noise_loss(t, t.constant(xh), x, y, g, CosineOptions::evaluation())).item();
}

std::pair<double, double> adversarial_value(double real, double fake) {
  Tape t;
  AdversarialLosses l = adversarial_losses(t, t.constant(vec({real})), t.constant(vec({fake})));
  return {t.value(l.d_loss).item(), t.value(l.g_adv).item()};
}

void loss_algebra(Check& c) {
  c.expect(cos_value(vec({1, 0}), vec({1, 0})) == -1.0, "cosine of equal vectors is not -1");
  c.expect(cos_value(vec({1, 0}), vec({0, 1})) == 0.0, "cosine of orthogonal vectors is not 0");
  c.expect(cos_value(vec({1, 1}), vec({1, -1})) == 0.0, "cosine of [1,1],[1,-1] is not 0");
  c.expect(granular_value(vec({1, 0, 0, 1}), vec({1, 0, 1, 0}), 2) == -0.5, "granular example is not -0.5");

  // Positive scale invariance and the single-slice reduction, random inputs.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> alpha_u(1e-3, 1e3);
  double worst_scale = 0.0;
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Array a = test::random_array({64}, 100 + trial), b = test::random_array({64}, 200 + trial);
    Array as = a;
    const double alpha = alpha_u(rng);
    for (double& v : as.data()) v *= alpha;
    worst_scale = std::max(worst_scale, std::abs(cos_value(as, b) - cos_value(a, b)));
    c.expect(granular_value(a, b, 64) == cos_value(a, b), "K=1 granular loss differs from the cosine loss");
  }
  c.expect(worst_scale < 1e-12, fmt::format("scale invariance off by {:.2e}", worst_scale));

  // Estimate twice the clean signal: only the noise term notices.
  const Array x = vec({1, 0}), y = vec({1, 1});
  const double sn = sn_value(vec({2, 0}), x, y, 2);
  c.expect(std::abs(sn - -0.8535533905932737) < 1e-6, fmt::format("scaled estimate gives {:.10f}", sn));
  c.expect(std::abs(sn - -0.8536) < 1e-4, "scaled estimate does not round to -0.8536");
  c.expect(sn_value(x, x, y, 2) == -1.0, "perfect estimate is not -1");
  bool threw = false;
  try {
    sn_value(y, x, y, 2);
  } catch (const DataError&) {
    threw = true;
  }
  c.expect(threw, "zero estimated noise is not rejected in evaluation mode");

  c.expect(adversarial_value(1.0, 0.0).first == 0.0, "least-squares D loss at (1,0) is not 0");
  c.expect(adversarial_value(0.3, 1.0).second == 0.0, "least-squares G loss at fake=1 is not 0");
  c.expect(adversarial_value(0.0, 1.0).first == 1.0, "least-squares D loss at (0,1) is not 1");

  Tape t;
  Array f = test::random_array({2, 3, 4, 5}, 9), r = test::random_array({2, 3, 4, 5}, 10);
  Array shifted = f;
  for (double& v : shifted.data()) v += 0.75;
  TapMap fake{{3, t.constant(f)}}, same{{3, t.constant(f)}}, up{{3, t.constant(shifted)}}, rnd{{3, t.constant(r)}};
  c.expect(t.value(dynamic_perceptual_loss(t, fake, same, 3)).item() == 0.0, "DPL of identical features is not 0");
  c.expect(std::abs(t.value(dynamic_perceptual_loss(t, up, fake, 3)).item() - 0.75) < 1e-14,
           "DPL of a constant shift is not the shift");
  double brute = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) brute += std::abs(f[i] - r[i]);
  brute /= static_cast<double>(f.size());
  c.expect(std::abs(t.value(dynamic_perceptual_loss(t, fake, rnd, 3)).item() - brute) < 1e-12,
           "DPL differs from the brute-force mean absolute difference");
  c.note(fmt::format("scaled-estimate loss {:.8f}, scale drift {:.1e}", sn, worst_scale));
}

// ---------------------------------------------------------------------------

void scheduler_fidelity(Check& c) {
  GranularitySchedule s;
  s.g_start = std::size_t{1} << 14;
  s.g_min = std::size_t{1} << 6;
  s.mode = GranularityMode::kEpochStep;
  s.period = 20;
  std::set<std::size_t> levels;
  for (int e = 0; e <= 400; ++e) {
    const std::size_t want = s.g_start >> std::min(e / 20, 8);
    const std::size_t got = current_granularity(s, e);
    c.expect(got == want, fmt::format("granularity at epoch {} is {}, want {}", e, got, want));
    if (e < 180) levels.insert(got);
  }
  c.expect(current_granularity(s, 0) == 16384, "epoch 0 not 2^14");
  c.expect(current_granularity(s, 39) == 8192, "epoch 39 not 2^13");
  c.expect(current_granularity(s, 200) == 64, "epoch 200 not 2^6");
  c.expect(levels.size() == 9, fmt::format("180 epochs visit {} levels", levels.size()));

  DplSchedule d{true, 80, {9, 7, 5, 3}, DplComposition::kAdd};
  const int taps[5] = {-1, 9, 7, 5, 3};
  for (int e = 0; e <= 500; ++e) {
    const int want = taps[std::min(e / 80, 4)];
    const int got = active_dpl_tap(d, e).value_or(-1);
    c.expect(got == want, fmt::format("dpl tap at epoch {} is {}, want {}", e, got, want));
  }
  c.expect(!active_dpl_tap(d, 10).has_value(), "epoch 10 has a tap");
  c.expect(active_dpl_tap(d, 80) == 9 && active_dpl_tap(d, 100) == 9, "epochs 80/100 not on tap 9");
  c.expect(active_dpl_tap(d, 250) == 5, "epoch 250 not on tap 5");
  c.expect(active_dpl_tap(d, 400) == 3, "epoch 400 not on tap 3");
}

// ---------------------------------------------------------------------------

std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Segmental SNR by scalar loops in extended precision.
double ssnr_oracle(const std::vector<double>& c, const std::vector<double>& e) {
  double sum = 0.0;
  int frames = 0;
  for (std::size_t start = 0; start + 256 <= c.size(); start += 128) {
    long double s = 0, d = 0;
    for (std::size_t i = start; i < start + 256; ++i) {
      s += static_cast<long double>(c[i]) * c[i];
      d += static_cast<long double>(c[i] - e[i]) * (c[i] - e[i]);
    }
    if (s == 0) continue;
    const double db = d == 0 ? 35.0 : 10.0 * std::log10(static_cast<double>(s / d));
    sum += std::clamp(db, -10.0, 35.0);
    ++frames;
  }
  return sum / frames;
}

void mixing_loop(Check& c) {
  double worst_snr = 0.0;
  for (double want : {15.0, 10.0, 5.0, 0.0, 17.5, 12.5, 7.5, 2.5}) {
    for (NoiseKind kind : {NoiseKind::kWhite, NoiseKind::kPink, NoiseKind::kBabble}) {
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const AudioBuffer clean = synth_clean_samples(16000, {}, 500 + seed);
        const AudioBuffer noise = synth_noise(kind, 16000, 900 + seed);
        for (const MixOptions& opt : {MixOptions{}, MixOptions{kFloat32Quantum}}) {
          const NoisyPair p = mix_at_snr(clean, noise, want, opt);
          const double err = std::abs(snr(p.clean.samples, p.noisy.samples) - want);
          worst_snr = std::max(worst_snr, err);
          c.expect(err < 1e-9, fmt::format("{} dB {} seed {} off by {:.2e}", want, to_string(kind), seed, err));
        }
      }
    }
  }
  double worst_ssnr = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<double> clean = gaussian(6000 + 53 * seed, 10 + seed, 1.0);
    const std::vector<double> noise = gaussian(clean.size(), 50 + seed, 0.05 + 0.3 * seed);
    std::fill(clean.begin() + 700, clean.begin() + 1400, 0.0);
    std::vector<double> enhanced(clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) enhanced[i] = clean[i] + noise[i];
    const double err = std::abs(ssnr(clean, enhanced) - ssnr_oracle(clean, enhanced));
    worst_ssnr = std::max(worst_ssnr, err);
    c.expect(err < 1e-9, fmt::format("ssnr pair {} off by {:.2e}", seed, err));
  }
  c.note(fmt::format("snr closure {:.1e} dB, ssnr vs oracle {:.1e} dB", worst_snr, worst_ssnr));
}

// ---------------------------------------------------------------------------

void desk_ablation(Check& c, const fs::path& work) {
  const auto t0 = Clock::now();
  RunConfig base = load_config(fs::path(C2F_SOURCE_DIR) / "configs" / "ablation.ini");
  base.ablate.variants = {"D", "D+M"};
  const fs::path data = work / "ablation_data", out = work / "ablation_out";
  SynthSummary synth = synth_dataset(base.data, data);
  c.expect(synth.train_pairs >= 120, fmt::format("only {} train pairs", synth.train_pairs));
  c.expect(base.train.epochs == 40, "not 40 epochs");
  c.expect(base.ablate.seeds.size() == 4, "not 4 seeds");
  AblationResult r = run_ablation(base, data, out);

  std::map<std::uint64_t, std::map<std::string, AblationRun>> by_seed;
  for (const AblationRun& run : r.runs) by_seed[run.seed][run.variant] = run;
  int wins = 0;
  for (const auto& [seed, runs] : by_seed) {
    const AblationRun& d = runs.at("D");
    const AblationRun& dm = runs.at("D+M");
    if (dm.final_ssnr >= d.final_ssnr) ++wins;
    for (const AblationRun* run : {&d, &dm}) {
      const double gain = run->final_ssnr - run->noisy_ssnr;
      c.expect(gain >= 3.0, fmt::format("{} seed {} improves only {:.2f} dB", run->variant, seed, gain));
    }
    c.note(fmt::format("seed {}: noisy {:.2f}  D {:.2f}  D+M {:.2f} dB", seed, d.noisy_ssnr, d.final_ssnr,
                       dm.final_ssnr));
  }
  c.expect(wins >= 3, fmt::format("coarse-to-fine wins {} of {} seeds", wins, by_seed.size()));
  const double sec = seconds_since(t0);
  c.expect(sec <= 3600.0, fmt::format("took {:.0f} s", sec));
  c.note(fmt::format("D+M >= D in {} of {} seeds, {:.0f} s", wins, by_seed.size(), sec));
}

// ---------------------------------------------------------------------------

void gan_smoke(Check& c) {
  TrainConfig cfg = test::tiny_train_config();
  cfg.mode = TrainMode::kGan;
  cfg.epochs = 20;
  cfg.generator.latent.enabled = true;
  cfg.dpl = DplSchedule{true, 3, {3, 1}, DplComposition::kAdd};
  cfg.granularity.period = 2;
  const TrainingSet data = make_training_set(test::toy_pairs(4, 1024), 256, 256);

  ParamSet last_g, last_d;
  bool first = true;
  int violations = 0, steps = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const StepEvent& e) {
    ++steps;
    if (e.discriminator == nullptr) {
      ++violations;
      return;
    }
    if (!first) {
      // Exactly one network changes per update.
      const bool g_same = e.generator.params == last_g.params && e.generator == last_g;
      const bool d_same = *e.discriminator == last_d;
      if (e.phase == StepPhase::kDiscriminator && (!g_same || d_same)) ++violations;
      if (e.phase == StepPhase::kGenerator && (g_same || !d_same)) ++violations;
    }
    first = false;
    last_g = e.generator;
    last_d = *e.discriminator;
  };
  TrainResult r = train_gan(cfg, data, hooks);
  c.expect(violations == 0, fmt::format("{} isolation violations over {} updates", violations, steps));

  int first_tap_epoch = -1;
  bool finite = true;
  for (const HistoryRow& row : r.history) {
    finite = finite && std::isfinite(row.loss_total) && std::isfinite(row.loss_d) && std::isfinite(row.loss_adv) &&
             std::isfinite(row.loss_dpl) && std::isfinite(row.loss_reg);
    const int g_epoch = generator_epoch(cfg, row.epoch);
    const int want = active_dpl_tap(cfg.dpl, g_epoch).value_or(-1);
    c.expect(row.tap == want, fmt::format("pass {} logs tap {}, want {}", row.epoch, row.tap, want));
    if (row.tap != -1 && first_tap_epoch < 0) first_tap_epoch = g_epoch;
  }
  c.expect(finite, "non-finite loss in the GAN history");
  c.expect(first_tap_epoch == cfg.dpl.phase_length,
           fmt::format("perceptual term starts at generator epoch {}, want {}", first_tap_epoch,
                       cfg.dpl.phase_length));

  // Adversarial and perceptual terms off: the GAN loop is the discriminative one.
  TrainConfig disc = test::tiny_train_config();
  disc.epochs = 20;
  disc.granularity.mode = GranularityMode::kConstant;
  disc.granularity.g_start = 64;
  TrainConfig reduced = disc;
  reduced.mode = TrainMode::kGan;
  reduced.weights.adversarial_coeff = 0.0;
  reduced.weights.perceptual_coeff = 0.0;
  reduced.weights.regularization_coeff = 1.0;
  reduced.dpl.enabled = false;
  const TrainResult a = train_discriminative(disc, data);
  const TrainResult b = train_gan(reduced, data);
  bool same = a.history.size() == b.history.size() && a.epoch_losses == b.epoch_losses;
  for (std::size_t i = 0; same && i < a.history.size(); ++i) same = a.history[i].loss_total == b.history[i].loss_total;
  c.expect(same, "reduced GAN loss trajectory differs from the discriminative one");
  c.expect(a.checkpoint.generator == b.checkpoint.generator, "reduced GAN generator differs");
  c.note(fmt::format("{} updates, tap from generator epoch {}, reduction over {} steps bit-identical: {}", steps,
                     first_tap_epoch, a.history.size(), same ? "yes" : "no"));
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(C2F_CLI_PATH) + " --log-level warn " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Relative path -> bytes of every regular file below `root`.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = test::read_file(e.path());
  }
  return files;
}

void reproducibility(Check& c, const fs::path& work) {
  const std::string tiny = std::string(C2F_SOURCE_DIR) + "/configs/tiny.ini";
  std::map<std::string, std::string> runs[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path root = work / fmt::format("repro{}", i);
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path log = work / fmt::format("repro{}.log", i);
    const std::string data = (root / "data").string(), model = (root / "model").string();
    c.expect(run_cli("synth-data --config " + tiny + " --out " + data, log) == 0, "synth-data failed");
    c.expect(run_cli("train --config " + tiny + " --data " + data + " --out " + model, log) == 0, "train failed");
    c.expect(run_cli("evaluate --config " + tiny + " --checkpoint " + model + "/checkpoint.c2f --manifest " + data +
                         "/test/manifest.jsonl --out " + (root / "report.csv").string(),
                     log) == 0,
             "evaluate failed");
    runs[i] = snapshot(root);
  }
  c.expect(!runs[0].empty(), "no files produced");
  c.expect(runs[0].size() == runs[1].size(), "runs produced different file sets");
  for (const auto& [name, bytes] : runs[0]) {
    auto it = runs[1].find(name);
    c.expect(it != runs[1].end() && it->second == bytes, name + " differs between runs");
  }
  for (const char* key : {"data/train/manifest.jsonl", "model/checkpoint.c2f", "report.csv"}) {
    c.expect(runs[0].count(key) == 1, std::string(key) + " missing");
  }
  c.note(fmt::format("{} files compared byte for byte", runs[0].size()));
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* title;
  std::function<void(Check&)> run;
};

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Keep per-step tape arrays in the heap instead of fresh mmaps.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"c2f acceptance criteria"};
  std::vector<int> only;
  std::string work_arg;
  bool keep = false;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--work", work_arg, "scratch directory (default: a temporary one)");
  app.add_flag("--keep", keep, "keep the scratch directory");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);

  fs::path work = work_arg.empty() ? fs::temp_directory_path() / fmt::format("c2f_acceptance_{}", ::getpid())
                                   : fs::path(work_arg);
  fs::create_directories(work);

  const std::vector<Criterion> criteria{
      {1, "STFT round trip (1024/256, 2 s signals)", stft_round_trip},
      {2, "gradient suite", gradient_suite},
      {3, "loss algebra", loss_algebra},
      {4, "scheduler timelines", scheduler_fidelity},
      {5, "mixing and metric closure", mixing_loop},
      {6, "desk ablation D vs D+M", [&](Check& c) { desk_ablation(c, work); }},
      {7, "GAN smoke and reduction", gan_smoke},
      {8, "CLI reproducibility", [&](Check& c) { reproducibility(c, work); }},
  };

  int failed = 0;
  for (const Criterion& cr : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), cr.id) == only.end()) continue;
    Check c;
    const auto t0 = Clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = c.failures.empty();
    failed += ok ? 0 : 1;
    std::printf("criterion %d %s: %s (%.1f s)\n", cr.id, ok ? "PASS" : "FAIL", cr.title, seconds_since(t0));
    for (const std::string& n : c.notes) std::printf("    %s\n", n.c_str());
    const std::size_t shown = std::min<std::size_t>(c.failures.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) std::printf("    ! %s\n", c.failures[i].c_str());
    if (c.failures.size() > shown) std::printf("    ! ... %zu more\n", c.failures.size() - shown);
    std::fflush(stdout);
  }
  if (!keep && work_arg.empty()) {
    std::error_code ec;
    fs::remove_all(work, ec);
  } else {
    std::printf("scratch files in %s\n", work.string().c_str());
  }
  return failed == 0 ? 0 : 1;
}
