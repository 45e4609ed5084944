// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/losses.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include <fmt/format.h>

#include "c2f/errors.h"
#include "c2f/fft.h"
#include "c2f/ops.h"

namespace c2f {

using ag::Array;
using ag::Shape;
using ag::Tape;
using ag::Var;

ag::Var cosine_loss(Tape& t, Var a, Var b, const CosineOptions& opt) {
  const Array& av = t.value(a);
  return granular_cosine_loss(t, a, b, av.rank() >= 2 ? av.shape().back() : av.size(), opt);
}

ag::Var granular_cosine_loss(Tape& t, Var a, Var b, std::size_t g, const CosineOptions& opt) {
  const Array& av = t.value(a);
  const Array& bv = t.value(b);
  if (av.shape() != bv.shape()) {
    throw ShapeError(fmt::format("granular_cosine: shapes {} and {} differ", ag::shape_str(av.shape()),
                                 ag::shape_str(bv.shape())));
  }
  const std::size_t total = av.size();
  const std::size_t row = av.rank() >= 2 ? av.shape().back() : total;
  if (total == 0 || g == 0 || g > row || row % g != 0) {
    throw ShapeError(fmt::format("granular_cosine: granularity {} does not divide length {}", g, row));
  }
  const std::size_t slices = total / g;
  const double eps = opt.strict ? 0.0 : opt.eps;

  // Per-slice dot, |a|, |b|
  auto stats = std::make_shared<std::vector<double>>(3 * slices);
  double acc = 0.0;
  for (std::size_t s = 0; s < slices; ++s) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = s * g; i < (s + 1) * g; ++i) {
      ab += av[i] * bv[i];
      aa += av[i] * av[i];
      bb += bv[i] * bv[i];
    }
    if (opt.strict && (aa == 0.0 || bb == 0.0)) {
      throw DataError(fmt::format("cosine loss: zero-norm {} slice {} (granularity {})",
                                  aa == 0.0 ? "prediction" : "target", s, g));
    }
    const double na = std::sqrt(aa + eps);
    const double nb = std::sqrt(bb + eps);
    (*stats)[3 * s] = ab;
    (*stats)[3 * s + 1] = na;
    (*stats)[3 * s + 2] = nb;
    acc += -ab / (na * nb);
  }
  const double inv_k = 1.0 / static_cast<double>(slices);
  return t.record(ag::Op::kGranularCosine, {a, b}, Array::scalar(acc * inv_k),
                  [a, b, g, slices, stats, inv_k](Tape& tape, const Array& grad) {
    const Array& av = tape.value(a);
    const Array& bv = tape.value(b);
    const double scale = grad[0] * inv_k;
    Array* ga = tape.requires_grad(a) ? &tape.adjoint(a) : nullptr;
    Array* gb = tape.requires_grad(b) ? &tape.adjoint(b) : nullptr;
    for (std::size_t s = 0; s < slices; ++s) {
      const double ab = (*stats)[3 * s];
      const double na = (*stats)[3 * s + 1];
      const double nb = (*stats)[3 * s + 2];
      const double inv = 1.0 / (na * nb);
      const double ca = ab / (na * na * na * nb);
      const double cb = ab / (na * nb * nb * nb);
      for (std::size_t i = s * g; i < (s + 1) * g; ++i) {
        if (ga) (*ga)[i] += scale * (-bv[i] * inv + ca * av[i]);
        if (gb) (*gb)[i] += scale * (-av[i] * inv + cb * bv[i]);
      }
    }
  });
}

ag::Var signal_noise_loss(Tape& t, Var x_hat, const Array& clean, const Array& noisy, std::size_t g,
                          const CosineOptions& opt) {
  const Shape& s = t.value(x_hat).shape();
  if (clean.shape() != s || noisy.shape() != s) {
    throw ShapeError(fmt::format("signal_noise_loss: shapes {} / {} / {} differ", ag::shape_str(s),
                                 ag::shape_str(clean.shape()), ag::shape_str(noisy.shape())));
  }
  Array noise(s);
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = noisy[i] - clean[i];
  Var x = t.constant(clean);
  Var y = t.constant(noisy);
  Var n = t.constant(std::move(noise));
  Var signal_term = granular_cosine_loss(t, x_hat, x, g, opt);
  Var noise_hat = ag::sub(t, y, x_hat);
  Var noise_term = granular_cosine_loss(t, noise_hat, n, g, opt);
  return ag::scalar_mul(t, ag::add(t, signal_term, noise_term), 0.5);
}

// ---------------------------------------------------------------------------

std::string to_string(GranularityMode mode) {
  switch (mode) {
    case GranularityMode::kConstant: return "constant";
    case GranularityMode::kEpochStep: return "epoch_step";
    case GranularityMode::kPlateau: return "plateau";
  }
  return "unknown";
}

GranularityMode parse_granularity_mode(const std::string& name) {
  if (name == "constant") return GranularityMode::kConstant;
  if (name == "epoch_step") return GranularityMode::kEpochStep;
  if (name == "plateau") return GranularityMode::kPlateau;
  throw ConfigError(fmt::format("unknown granularity mode '{}'", name));
}

void GranularitySchedule::validate(std::size_t slice_len) const {
  if (!is_power_of_two(g_start) || !is_power_of_two(g_min)) {
    throw ConfigError(fmt::format("granularities must be powers of two ({} / {})", g_start, g_min));
  }
  if (g_min > g_start) throw ConfigError("granularity: g_min exceeds g_start");
  if (slice_len % g_start != 0) {
    throw ConfigError(fmt::format("granularity {} does not divide slice length {}", g_start, slice_len));
  }
  if (mode == GranularityMode::kEpochStep && period <= 0) throw ConfigError("granularity: period must be positive");
  if (mode == GranularityMode::kPlateau && (plateau_window < 2 || plateau_max_epochs <= 0)) {
    throw ConfigError("granularity: plateau window must be >= 2 and max epochs positive");
  }
}

std::size_t current_granularity(const GranularitySchedule& s, int epoch,
                                const std::vector<double>& loss_history) {
  if (epoch <= 0) return s.g_start;
  switch (s.mode) {
    case GranularityMode::kConstant:
      return s.g_start;
    case GranularityMode::kEpochStep: {
      std::size_t g = s.g_start;
      for (int level = epoch / s.period; level > 0 && g > s.g_min; --level) g /= 2;
      return std::max(g, s.g_min);
    }
    case GranularityMode::kPlateau: {
      std::size_t g = s.g_start;
      int level_start = 0;
      const int known = std::min<int>(epoch, static_cast<int>(loss_history.size()));
      // Decide the granularity of epoch e from losses of epochs < e.
      for (int e = 1; e <= known && g > s.g_min; ++e) {
        const int at_level = e - level_start;
        bool halve = at_level >= s.plateau_max_epochs;
        if (!halve && at_level >= s.plateau_window) {
          const double first = loss_history[static_cast<std::size_t>(e - s.plateau_window)];
          const double last = loss_history[static_cast<std::size_t>(e - 1)];
          halve = (first - last) / (s.plateau_window - 1) < s.plateau_threshold;
        }
        if (halve) {
          g /= 2;
          level_start = e;
        }
      }
      return g;
    }
  }
  return s.g_start;
}

// ---------------------------------------------------------------------------

std::string to_string(AdversarialForm form) {
  return form == AdversarialForm::kLeastSquares ? "least_squares" : "log";
}

AdversarialForm parse_adversarial_form(const std::string& name) {
  if (name == "least_squares" || name == "l2") return AdversarialForm::kLeastSquares;
  if (name == "log") return AdversarialForm::kLog;
  throw ConfigError(fmt::format("unknown adversarial form '{}'", name));
}

void LossWeights::validate() const {
  if (regularization_coeff < 0.0 || adversarial_coeff < 0.0 || perceptual_coeff < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
}

namespace {

// Mean over the batch of log(clamp(sigmoid(s))).
Var mean_log_sigmoid(Tape& t, Var scores) {
  constexpr double kLo = 1e-7;
  constexpr double kHi = 1.0 - 1e-7;
  const Array& sv = t.value(scores);
  double acc = 0.0;
  for (double s : sv.data()) acc += std::log(std::clamp(1.0 / (1.0 + std::exp(-s)), kLo, kHi));
  const double inv = 1.0 / static_cast<double>(sv.size());
  return t.record(ag::Op::kMeanLogSigmoid, {scores}, Array::scalar(acc * inv), [scores, inv](Tape& tape, const Array& g) {
    const Array& sv = tape.value(scores);
    Array& gs = tape.adjoint(scores);
    for (std::size_t i = 0; i < sv.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-sv[i]));
      if (p > kLo && p < kHi) gs[i] += g[0] * inv * (1.0 - p);
    }
  });
}

Var half_mean_square_offset(Tape& t, Var scores, double target) {
  Var shifted = target == 0.0 ? scores : ag::add_scalar(t, scores, -target);
  return ag::scalar_mul(t, ag::reduce_mean(t, ag::square(t, shifted)), 0.5);
}

}  // namespace

AdversarialLosses adversarial_losses(Tape& t, Var score_real, Var score_fake, AdversarialForm form) {
  if (t.value(score_real).size() != t.value(score_fake).size()) {
    throw ShapeError("adversarial_losses: real/fake score counts differ");
  }
  AdversarialLosses out;
  if (form == AdversarialForm::kLeastSquares) {
    Var real_term = ag::reduce_mean(t, ag::square(t, ag::add_scalar(t, score_real, -1.0)));
    Var fake_term = ag::reduce_mean(t, ag::square(t, score_fake));
    out.d_loss = ag::scalar_mul(t, ag::add(t, real_term, fake_term), 0.5);
    out.g_adv = half_mean_square_offset(t, score_fake, 1.0);
  } else {
    Var log_real = mean_log_sigmoid(t, score_real);
    Var log_fake = mean_log_sigmoid(t, score_fake);
    out.d_loss = ag::sub(t, log_fake, log_real);
    out.g_adv = ag::scalar_mul(t, log_fake, -1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------

ag::Var dynamic_perceptual_loss(Tape& t, const TapMap& taps_fake, const TapMap& taps_real, int tap_layer) {
  auto f = taps_fake.find(tap_layer);
  auto r = taps_real.find(tap_layer);
  if (f == taps_fake.end() || r == taps_real.end()) {
    throw ConfigError(fmt::format("dynamic perceptual loss: tap layer {} not available", tap_layer));
  }
  Var diff = ag::sub(t, f->second, r->second);
  const double inv = 1.0 / static_cast<double>(t.value(diff).size());
  return ag::scalar_mul(t, ag::abs_sum(t, diff), inv);
}

std::string to_string(DplComposition c) { return c == DplComposition::kAdd ? "add" : "replace"; }

DplComposition parse_dpl_composition(const std::string& name) {
  if (name == "add") return DplComposition::kAdd;
  if (name == "replace") return DplComposition::kReplace;
  throw ConfigError(fmt::format("unknown dpl composition '{}'", name));
}

void DplSchedule::validate() const {
  if (phase_length <= 0) throw ConfigError("dpl: phase_length must be positive");
}

std::optional<int> active_dpl_tap(const DplSchedule& s, int epoch) {
  if (!s.enabled || s.taps.empty() || epoch < s.phase_length) return std::nullopt;
  const auto phase = static_cast<std::size_t>(epoch / s.phase_length);
  return s.taps[std::min(phase - 1, s.taps.size() - 1)];
}

}  // namespace c2f
