// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "c2f/errors.h"
#include "c2f/hash.h"
#include "c2f/ops.h"

namespace c2f {

using ag::Array;
using ag::Shape;
using ag::Tape;
using ag::Var;

std::string to_string(TrainMode mode) { return mode == TrainMode::kGan ? "gan" : "discriminative"; }

TrainMode parse_train_mode(const std::string& name) {
  if (name == "discriminative" || name == "disc") return TrainMode::kDiscriminative;
  if (name == "gan") return TrainMode::kGan;
  throw ConfigError(fmt::format("unknown training mode '{}'", name));
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("train: epochs must be positive");
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  // lr = 0 is accepted as a no-op run.
  if (!(adam.lr >= 0.0) || !(disc_lr >= 0.0)) throw ConfigError("train: learning rates must be non-negative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0) || !(adam.weight_decay >= 0.0)) throw ConfigError("train: bad Adam eps/weight_decay");
  for (std::size_t i = 0; i < lr_schedule.size(); ++i) {
    if (lr_schedule[i].first < 0 || !(lr_schedule[i].second > 0.0)) {
      throw ConfigError("train: lr_schedule entries need epoch >= 0 and multiplier > 0");
    }
    if (i > 0 && lr_schedule[i].first <= lr_schedule[i - 1].first) {
      throw ConfigError("train: lr_schedule epochs must be strictly increasing");
    }
  }
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw ConfigError("train: bn_momentum must lie in [0, 1)");
  if (slice_stride == 0 || slice_stride > slice_len) throw ConfigError("train: need 0 < slice_stride <= slice_len");
  granularity.validate(slice_len);
  weights.validate();
  dpl.validate();
  generator.validate();

  if (slice_len < stft.window_len() || (slice_len - stft.window_len()) % stft.hop() != 0) {
    throw ConfigError(fmt::format("train: slice_len {} is not a whole number of STFT frames (window {}, hop {})",
                                  slice_len, stft.window_len(), stft.hop()));
  }
  const GridShape grid = network_grid(stft, slice_len);
  if (grid.frames % generator.frame_stride() != 0 || grid.bins % generator.bin_stride() != 0) {
    throw ConfigError(fmt::format("train: grid {}x{} is not divisible by the encoder stride {}x{}", grid.frames,
                                  grid.bins, generator.frame_stride(), generator.bin_stride()));
  }
  if (mode == TrainMode::kGan) {
    discriminator.validate();
    if (dpl.enabled && dpl.taps != discriminator.tap_layers) {
      throw ConfigError("train: dpl taps must equal the discriminator's tap layers");
    }
  }
}

bool OptimizerState::operator==(const OptimizerState& other) const {
  auto same = [](const std::map<std::string, Array>& a, const std::map<std::string, Array>& b) {
    if (a.size() != b.size()) return false;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->second.shape() != ib->second.shape() ||
          ia->second.storage() != ib->second.storage()) {
        return false;
      }
    }
    return true;
  };
  return step == other.step && same(m, other.m) && same(v, other.v);
}

void adam_step(std::map<std::string, Array>& params, const ag::GradientMap& grads, OptimizerState& state,
               const AdamHyper& h, double lr) {
  for (const auto& [key, p] : params) {
    auto it = grads.find(key);
    if (it == grads.end()) throw ShapeError(fmt::format("adam: no gradient for '{}'", key));
    if (it->second.shape() != p.shape()) {
      throw ShapeError(fmt::format("adam: gradient shape {} != parameter shape {} for '{}'",
                                   ag::shape_str(it->second.shape()), ag::shape_str(p.shape()), key));
    }
  }
  if (grads.size() != params.size()) throw ShapeError("adam: gradient map has keys without parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (auto& [key, p] : params) {
    const Array& g = grads.at(key);
    Array& m = state.m.try_emplace(key, p.shape(), 0.0).first->second;
    Array& v = state.v.try_emplace(key, p.shape(), 0.0).first->second;
    if (m.shape() != p.shape() || v.shape() != p.shape()) {
      throw ShapeError(fmt::format("adam: moment shape mismatch for '{}'", key));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * (m_hat / (std::sqrt(v_hat) + h.eps) + h.weight_decay * p[i]);
    }
  }
}

double lr_at(const TrainConfig& cfg, int epoch) {
  double lr = cfg.adam.lr;
  for (const auto& [e, mult] : cfg.lr_schedule) {
    if (e <= epoch) lr *= mult;
  }
  return lr;
}

int generator_epoch(const TrainConfig& cfg, int pass) { return cfg.mode == TrainMode::kGan ? pass / 2 : pass; }

// ---------------------------------------------------------------------------
// History log

std::string history_csv_header() { return "epoch,step,granularity,tap,loss_total,loss_reg,loss_adv,loss_dpl,loss_d"; }

std::string history_csv_row(const HistoryRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{}", r.epoch, r.step, r.granularity, r.tap, r.loss_total, r.loss_reg,
                     r.loss_adv, r.loss_dpl, r.loss_d);
}

std::uint64_t history_digest(const std::vector<HistoryRow>& rows) {
  std::uint64_t h = fnv1a64(history_csv_header() + "\n");
  for (const auto& r : rows) h = fnv1a64(history_csv_row(r) + "\n", h);
  return h;
}

// ---------------------------------------------------------------------------
// Training

namespace {

// Seed stream tags.
constexpr std::uint64_t kGenInit = 0x67656e;
constexpr std::uint64_t kDiscInit = 0x646973;
constexpr std::uint64_t kShuffle = 0x736875;
constexpr std::uint64_t kLatent = 0x6c6174;

struct Batch {
  Array clean;   // (B, L)
  Array noisy;   // (B, L)
  Array planes;  // (B, 2, frames, bins) noisy spectrum
  Array clean_planes;
};

class BatchMaker {
 public:
  BatchMaker(const TrainConfig& cfg, const TrainingSet& data, bool need_clean_spec)
      : cfg_(cfg), data_(data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      noisy_spec_.push_back(stft(data.noisy[i], cfg.stft));
      if (need_clean_spec) clean_spec_.push_back(stft(data.clean[i], cfg.stft));
    }
  }

  Batch make(const std::vector<std::size_t>& idx) const {
    const std::size_t b = idx.size(), len = data_.slice_len;
    Batch out{Array(Shape{b, len}), Array(Shape{b, len}), Array(), Array()};
    std::vector<ComplexSpectrogram> ns, cs;
    for (std::size_t k = 0; k < b; ++k) {
      std::copy(data_.clean[idx[k]].begin(), data_.clean[idx[k]].end(), out.clean.ptr() + k * len);
      std::copy(data_.noisy[idx[k]].begin(), data_.noisy[idx[k]].end(), out.noisy.ptr() + k * len);
      ns.push_back(noisy_spec_[idx[k]]);
      if (!clean_spec_.empty()) cs.push_back(clean_spec_[idx[k]]);
    }
    out.planes = spectra_to_planes(ns);
    if (!cs.empty()) out.clean_planes = spectra_to_planes(cs);
    return out;
  }

 private:
  const TrainConfig& cfg_;
  const TrainingSet& data_;
  std::vector<ComplexSpectrogram> noisy_spec_;
  std::vector<ComplexSpectrogram> clean_spec_;
};

void check_data(const TrainConfig& cfg, const TrainingSet& data) {
  if (data.size() == 0) throw DataError("train: training set is empty");
  if (data.slice_len != cfg.slice_len) {
    throw ConfigError(fmt::format("train: data sliced at {} but config slice_len is {}", data.slice_len,
                                  cfg.slice_len));
  }
}

void require_finite(double v, int epoch, int step, const char* component) {
  if (!std::isfinite(v)) {
    throw NumericError(fmt::format("non-finite {} loss at epoch {} step {}", component, epoch, step));
  }
}

void require_finite(const ag::GradientMap& grads, int epoch, int step, const char* component) {
  for (const auto& [k, g] : grads) {
    if (!g.all_finite()) {
      throw NumericError(fmt::format("non-finite gradient of {} loss for '{}' at epoch {} step {}", component, k,
                                     epoch, step));
    }
  }
}

std::vector<std::vector<std::size_t>> epoch_batches(const TrainConfig& cfg, std::size_t n, int pass) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(cfg.seed, {kShuffle, static_cast<std::uint64_t>(pass)}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += cfg.batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + cfg.batch_size)));
  }
  return batches;
}

// Per-generator-epoch mean signal+noise loss, for the plateau rule.
class LossHistory {
 public:
  void add(int g_epoch, double v) {
    if (static_cast<std::size_t>(g_epoch) >= sums_.size()) {
      sums_.resize(g_epoch + 1, 0.0);
      counts_.resize(g_epoch + 1, 0);
    }
    sums_[g_epoch] += v;
    ++counts_[g_epoch];
  }
  // Means of the generator epochs before `g_epoch`.
  std::vector<double> before(int g_epoch) const {
    std::vector<double> out;
    for (int e = 0; e < g_epoch && e < static_cast<int>(sums_.size()); ++e) {
      out.push_back(sums_[e] / static_cast<double>(counts_[e]));
    }
    return out;
  }

 private:
  std::vector<double> sums_;
  std::vector<std::size_t> counts_;
};

struct GeneratorStepInput {
  const Batch& batch;
  std::size_t granularity;
  double lr;
  std::optional<int> tap;
  std::optional<std::uint64_t> z_seed;
  int epoch, step;
};

struct GeneratorStepLosses {
  double signal_noise = 0.0;
  double reg = 0.0, adv = 0.0, dpl = 0.0, total = 0.0;
};

// One generator update. The discriminator (if given) enters as constants.
GeneratorStepLosses generator_step(const TrainConfig& cfg, ParamSet& gen, OptimizerState& opt,
                                   const ParamSet* disc, const GeneratorStepInput& in) {
  Tape tape;
  const Binding gb = bind(tape, gen, true);
  BatchNormUpdates updates;
  ForwardOptions fo;
  fo.training = true;
  fo.bn_updates = &updates;
  GeneratorOutput out = generator_forward(tape, gb, cfg.generator, cfg.stft, in.batch.planes, fo, in.z_seed);
  Var sn = signal_noise_loss(tape, out.enhanced_wave, in.batch.clean, in.batch.noisy, in.granularity);

  GeneratorStepLosses l;
  l.signal_noise = tape.value(sn).item();
  Var total = sn;
  if (cfg.mode == TrainMode::kGan) {
    total = ag::scalar_mul(tape, sn, cfg.weights.regularization_coeff);
    const bool use_dpl = in.tap.has_value() && cfg.weights.perceptual_coeff > 0.0;
    const bool replace = use_dpl && cfg.dpl.composition == DplComposition::kReplace;
    const bool use_adv = cfg.weights.adversarial_coeff > 0.0 && !replace;
    if (use_adv || use_dpl) {
      const Binding db = bind(tape, *disc, false);
      ForwardOptions dfo;
      dfo.training = true;
      Var cond = tape.constant(in.batch.planes);
      DiscriminatorOutput fake = discriminator_forward(tape, db, cfg.discriminator, out.enhanced_spec, cond, dfo);
      DiscriminatorOutput real =
          discriminator_forward(tape, db, cfg.discriminator, tape.constant(in.batch.clean_planes), cond, dfo);
      if (use_adv) {
        Var g_adv = adversarial_losses(tape, real.score, fake.score, cfg.adversarial).g_adv;
        Var w = ag::scalar_mul(tape, g_adv, cfg.weights.adversarial_coeff);
        l.adv = tape.value(w).item();
        total = ag::add(tape, total, w);
      }
      if (use_dpl) {
        Var d = dynamic_perceptual_loss(tape, fake.taps, real.taps, *in.tap);
        Var w = ag::scalar_mul(tape, d, cfg.weights.perceptual_coeff);
        l.dpl = tape.value(w).item();
        total = ag::add(tape, total, w);
      }
    }
  }
  l.total = tape.value(total).item();
  l.reg = cfg.mode == TrainMode::kGan ? cfg.weights.regularization_coeff * l.signal_noise : l.signal_noise;
  require_finite(l.total, in.epoch, in.step, "generator");
  const ag::GradientMap grads = ag::backward(tape, total);
  require_finite(grads, in.epoch, in.step, "generator");
  adam_step(gen.params, grads, opt, cfg.adam, in.lr);
  apply_batch_norm_updates(gen, updates, cfg.bn_momentum);
  return l;
}

// One discriminator update; the generator is frozen and its running
// statistics are left alone.
double discriminator_step(const TrainConfig& cfg, const ParamSet& gen, ParamSet& disc, OptimizerState& opt,
                          const Batch& batch, std::optional<std::uint64_t> z_seed, int epoch, int step) {
  Tape tape;
  const Binding gb = bind(tape, gen, false);
  ForwardOptions gfo;
  gfo.training = true;
  GeneratorOutput out = generator_forward(tape, gb, cfg.generator, cfg.stft, batch.planes, gfo, z_seed);
  const Binding db = bind(tape, disc, true);
  ForwardOptions dfo;
  dfo.training = true;
  Var cond = tape.constant(batch.planes);
  Var fake_spec = tape.constant(tape.value(out.enhanced_spec));
  DiscriminatorOutput real = discriminator_forward(tape, db, cfg.discriminator, tape.constant(batch.clean_planes),
                                                   cond, dfo);
  DiscriminatorOutput fake = discriminator_forward(tape, db, cfg.discriminator, fake_spec, cond, dfo);
  Var d_loss = adversarial_losses(tape, real.score, fake.score, cfg.adversarial).d_loss;
  const double value = tape.value(d_loss).item();
  require_finite(value, epoch, step, "discriminator");
  const ag::GradientMap grads = ag::backward(tape, d_loss);
  require_finite(grads, epoch, step, "discriminator");
  AdamHyper h = cfg.adam;
  adam_step(disc.params, grads, opt, h, cfg.disc_lr);
  return value;
}

}  // namespace

ParamSet initial_generator(const TrainConfig& cfg) {
  return init_generator(cfg.generator, derive_seed(cfg.seed, {kGenInit}));
}

ParamSet initial_discriminator(const TrainConfig& cfg) {
  return init_discriminator(cfg.discriminator, network_grid(cfg.stft, cfg.slice_len), derive_seed(cfg.seed, {kDiscInit}));
}

namespace {

TrainResult run_training(const TrainConfig& cfg, const TrainingSet& data, const TrainHooks& hooks) {
  cfg.validate();
  check_data(cfg, data);
  const bool gan = cfg.mode == TrainMode::kGan;
  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.config = cfg;
  ck.generator = initial_generator(cfg);
  if (gan) {
    ck.discriminator = initial_discriminator(cfg);
    ck.discriminator_opt = OptimizerState{};
  }
  const BatchMaker maker(cfg, data, gan);
  LossHistory history;
  int step = 0;
  for (int pass = 0; pass < cfg.epochs; ++pass) {
    const int g_epoch = generator_epoch(cfg, pass);
    const std::size_t g = current_granularity(cfg.granularity, g_epoch, history.before(g_epoch));
    const double lr = lr_at(cfg, g_epoch);
    const std::optional<int> tap = gan && cfg.dpl.enabled ? active_dpl_tap(cfg.dpl, g_epoch) : std::nullopt;
    double epoch_sum = 0.0;
    std::size_t epoch_steps = 0;
    for (const auto& idx : epoch_batches(cfg, data.size(), pass)) {
      const Batch batch = maker.make(idx);
      std::optional<std::uint64_t> z_seed;
      if (gan && cfg.generator.latent.enabled) {
        z_seed = derive_seed(cfg.seed, {kLatent, static_cast<std::uint64_t>(pass), static_cast<std::uint64_t>(step)});
      }
      HistoryRow row;
      row.epoch = pass;
      row.step = step;
      row.granularity = g;
      row.tap = tap.value_or(-1);
      if (gan) {
        row.loss_d = discriminator_step(cfg, ck.generator, *ck.discriminator, *ck.discriminator_opt, batch, z_seed,
                                        pass, step);
        if (hooks.on_step) hooks.on_step(StepEvent{StepPhase::kDiscriminator, pass, step, ck.generator, &*ck.discriminator});
      }
      const GeneratorStepLosses l = generator_step(cfg, ck.generator, ck.generator_opt,
                                                   gan ? &*ck.discriminator : nullptr,
                                                   GeneratorStepInput{batch, g, lr, tap, z_seed, pass, step});
      if (hooks.on_step) {
        hooks.on_step(StepEvent{StepPhase::kGenerator, pass, step, ck.generator, gan ? &*ck.discriminator : nullptr});
      }
      row.loss_total = l.total;
      row.loss_reg = l.reg;
      row.loss_adv = l.adv;
      row.loss_dpl = l.dpl;
      result.history.push_back(row);
      epoch_sum += l.signal_noise;
      ++epoch_steps;
      ++step;
    }
    const double mean = epoch_sum / static_cast<double>(epoch_steps);
    history.add(g_epoch, mean);
    result.epoch_losses.push_back(mean);
    spdlog::info("epoch {} granularity {} lr {} loss {:.6f}", pass, g, lr, mean);
    ck.epoch = pass + 1;
    if (hooks.on_epoch) hooks.on_epoch(pass, ck.generator);
  }
  ck.history_digest = history_digest(result.history);
  return result;
}

}  // namespace

TrainResult train_discriminative(const TrainConfig& cfg, const TrainingSet& data, const TrainHooks& hooks) {
  if (cfg.mode != TrainMode::kDiscriminative) throw ConfigError("train_discriminative: config mode is not discriminative");
  return run_training(cfg, data, hooks);
}

TrainResult train_gan(const TrainConfig& cfg, const TrainingSet& data, const TrainHooks& hooks) {
  if (cfg.mode != TrainMode::kGan) throw ConfigError("train_gan: config mode is not gan");
  return run_training(cfg, data, hooks);
}

TrainResult train(const TrainConfig& cfg, const TrainingSet& data, const TrainHooks& hooks) {
  return run_training(cfg, data, hooks);
}

// ---------------------------------------------------------------------------
// Inference

AudioBuffer enhance(const TrainConfig& cfg, const ParamSet& generator, const AudioBuffer& noisy) {
  validate(noisy, "enhance input");
  const SliceSet slices = slice_utterance(noisy, cfg.slice_len, cfg.slice_len, SliceMode::kNonOverlapped);
  GeneratorConfig gcfg = cfg.generator;
  gcfg.latent.enabled = false;
  constexpr std::size_t kChunk = 16;
  SliceSet out = slices;
  for (std::size_t start = 0; start < slices.slices.size(); start += kChunk) {
    const std::size_t end = std::min(slices.slices.size(), start + kChunk);
    std::vector<ComplexSpectrogram> specs;
    for (std::size_t i = start; i < end; ++i) specs.push_back(stft(slices.slices[i], cfg.stft));
    Tape tape;
    const Binding b = bind(tape, generator, false);
    ForwardOptions fo;
    fo.training = false;
    fo.state = &generator;
    GeneratorOutput g = generator_forward(tape, b, gcfg, cfg.stft, spectra_to_planes(specs), fo);
    const Array& wave = tape.value(g.enhanced_wave);
    for (std::size_t i = start; i < end; ++i) {
      std::copy_n(wave.ptr() + (i - start) * cfg.slice_len, cfg.slice_len, out.slices[i].begin());
    }
  }
  AudioBuffer result;
  result.samples = join_slices(out);
  result.sample_rate = noisy.sample_rate;
  return result;
}

AudioBuffer enhance(const Checkpoint& ckpt, const AudioBuffer& noisy) {
  return enhance(ckpt.config, ckpt.generator, noisy);
}

}  // namespace c2f
