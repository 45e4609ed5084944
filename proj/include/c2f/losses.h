// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "c2f/array.h"
#include "c2f/tape.h"

namespace c2f {

// Norms are sqrt(sum v^2 + eps). Strict mode uses eps = 0 and rejects
// zero-norm slices with DataError; training uses the smoothed form so silent
// (padded) slices contribute a vanishing gradient.
struct CosineOptions {
  double eps = 1e-12;
  bool strict = false;

  static CosineOptions evaluation() { return CosineOptions{0.0, true}; }
};

// -(a . b) / (|a| |b|) for vectors; (N, L) inputs give the mean over rows.
ag::Var cosine_loss(ag::Tape& t, ag::Var a, ag::Var b, const CosineOptions& opt = {});

// Mean of cosine_loss over consecutive disjoint slices of length g. For
// batched (N, L) inputs g must divide L, so slices never straddle examples
// and the result is the batch mean.
ag::Var granular_cosine_loss(ag::Tape& t, ag::Var a, ag::Var b, std::size_t g,
                             const CosineOptions& opt = {});

// 1/2 [gcl(x_hat, x) + gcl(y - x_hat, y - x)]: the noise term makes the loss
// sensitive to the scale of x_hat.
ag::Var signal_noise_loss(ag::Tape& t, ag::Var x_hat, const ag::Array& clean, const ag::Array& noisy,
                          std::size_t g, const CosineOptions& opt = {});

// ---------------------------------------------------------------------------
// Coarse-to-fine granularity schedule

enum class GranularityMode { kConstant, kEpochStep, kPlateau };

std::string to_string(GranularityMode mode);
GranularityMode parse_granularity_mode(const std::string& name);

struct GranularitySchedule {
  std::size_t g_start = 4096;
  std::size_t g_min = 32;
  GranularityMode mode = GranularityMode::kEpochStep;
  int period = 5;                   // epoch_step: epochs per level
  int plateau_window = 5;           // plateau: epochs compared
  double plateau_threshold = 1e-4;  // plateau: min mean improvement per epoch
  int plateau_max_epochs = 20;      // plateau: cap on epochs per level

  // g_start >= g_min >= 1, both powers of two, g_start divides slice_len.
  void validate(std::size_t slice_len) const;
};

// Per-epoch mean training loss, index = epoch. Only consulted in plateau mode
// (entries before `epoch`).
std::size_t current_granularity(const GranularitySchedule& s, int epoch,
                                const std::vector<double>& loss_history = {});

// ---------------------------------------------------------------------------
// Adversarial terms

enum class AdversarialForm { kLeastSquares, kLog };

std::string to_string(AdversarialForm form);
AdversarialForm parse_adversarial_form(const std::string& name);

struct LossWeights {
  double regularization_coeff = 40.0;
  double adversarial_coeff = 1.0;
  double perceptual_coeff = 100.0;

  void validate() const;
};

struct AdversarialLosses {
  ag::Var d_loss;
  ag::Var g_adv;
};

// Scores are (N) or (N, 1); both losses are batch means.
//   least squares: d = 1/2[(s_r - 1)^2 + s_f^2], g = 1/2 (s_f - 1)^2
//   log: d = -log D(s_r) + log D(s_f), g = -log D(s_f), D = sigmoid clamped
//        to [1e-7, 1 - 1e-7]
AdversarialLosses adversarial_losses(ag::Tape& t, ag::Var score_real, ag::Var score_fake,
                                     AdversarialForm form = AdversarialForm::kLeastSquares);

// ---------------------------------------------------------------------------
// Dynamic perceptual loss

using TapMap = std::map<int, ag::Var>;

// Mean absolute difference between the tapped features.
ag::Var dynamic_perceptual_loss(ag::Tape& t, const TapMap& taps_fake, const TapMap& taps_real,
                                int tap_layer);

enum class DplComposition { kAdd, kReplace };

std::string to_string(DplComposition c);
DplComposition parse_dpl_composition(const std::string& name);

struct DplSchedule {
  bool enabled = true;
  int phase_length = 80;
  std::vector<int> taps{9, 7, 5, 3};  // deep -> shallow
  DplComposition composition = DplComposition::kAdd;

  void validate() const;
};

// Phase 0 (epoch < phase_length) is score-only; phase k >= 1 uses taps[k-1],
// clamped to the last tap. Boundaries belong to the new phase.
std::optional<int> active_dpl_tap(const DplSchedule& s, int epoch);

}  // namespace c2f
