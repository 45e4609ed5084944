// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "c2f/dataset.h"
#include "c2f/losses.h"
#include "c2f/networks.h"
#include "c2f/signal_io.h"
#include "c2f/spectral.h"

namespace c2f {

enum class TrainMode { kDiscriminative, kGan };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);  // "discriminative"/"disc", "gan"

struct AdamHyper {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

// (epoch, multiplier): the multiplier applies from that epoch on.
using LrSchedule = std::vector<std::pair<int, double>>;

struct TrainConfig {
  TrainMode mode = TrainMode::kDiscriminative;
  int epochs = 40;  // passes over the data; the generator sees epochs/2 in gan mode
  std::size_t batch_size = 8;
  AdamHyper adam;
  LrSchedule lr_schedule{{9, 0.5}, {18, 0.5}, {27, 0.5}};
  double disc_lr = 2e-4;
  GranularitySchedule granularity;
  LossWeights weights;
  // Desk scale: one tap per 10 generator epochs over the 4-block backbone.
  DplSchedule dpl{true, 10, {4, 3, 2, 1}, DplComposition::kAdd};
  AdversarialForm adversarial = AdversarialForm::kLeastSquares;
  std::uint64_t seed = 1;
  std::size_t slice_len = 4096;
  std::size_t slice_stride = 2048;
  double bn_momentum = 0.9;
  StftConfig stft;
  GeneratorConfig generator = GeneratorConfig::desk_default();
  DiscriminatorConfig discriminator = DiscriminatorConfig::desk_default(GeneratorConfig::desk_default());

  // Throws ConfigError on any violated invariant, including slice geometry
  // that the STFT framing or the encoder strides cannot tile.
  void validate() const;
};

struct OptimizerState {
  std::map<std::string, ag::Array> m;
  std::map<std::string, ag::Array> v;
  std::int64_t step = 0;

  bool operator==(const OptimizerState& other) const;
};

// Decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
void adam_step(std::map<std::string, ag::Array>& params, const ag::GradientMap& grads, OptimizerState& state,
               const AdamHyper& hyper, double lr);

// Generator learning rate at a (generator) epoch.
double lr_at(const TrainConfig& cfg, int epoch);

// Epoch index used for the generator's schedules in a given pass.
int generator_epoch(const TrainConfig& cfg, int pass);

struct Checkpoint {
  TrainConfig config;
  ParamSet generator;
  std::optional<ParamSet> discriminator;
  OptimizerState generator_opt;
  std::optional<OptimizerState> discriminator_opt;
  int epoch = 0;  // passes completed
  std::uint64_t history_digest = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Stream forms; the file forms wrap these.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

// One row per optimization step. Loss columns hold weighted terms.
struct HistoryRow {
  int epoch = 0;
  int step = 0;
  std::size_t granularity = 0;
  int tap = -1;
  double loss_total = 0.0;  // generator objective
  double loss_reg = 0.0;    // regularization_coeff * signal+noise (1 * in discriminative mode)
  double loss_adv = 0.0;
  double loss_dpl = 0.0;
  double loss_d = 0.0;
};

std::string history_csv_header();
std::string history_csv_row(const HistoryRow& row);
std::uint64_t history_digest(const std::vector<HistoryRow>& rows);

enum class StepPhase { kDiscriminator, kGenerator };

// Called after every parameter update. Lets tests observe alternation.
struct StepEvent {
  StepPhase phase;
  int epoch;
  int step;
  const ParamSet& generator;
  const ParamSet* discriminator;
};

struct TrainHooks {
  std::function<void(const StepEvent&)> on_step;
  // After every pass, with the generator state at that point.
  std::function<void(int epoch, const ParamSet& generator)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<HistoryRow> history;
  std::vector<double> epoch_losses;  // mean signal+noise loss per pass
};

// Networks as the trainer initializes them for cfg.seed.
ParamSet initial_generator(const TrainConfig& cfg);
ParamSet initial_discriminator(const TrainConfig& cfg);

TrainResult train_discriminative(const TrainConfig& cfg, const TrainingSet& data, const TrainHooks& hooks = {});
TrainResult train_gan(const TrainConfig& cfg, const TrainingSet& data, const TrainHooks& hooks = {});
// Dispatches on cfg.mode.
TrainResult train(const TrainConfig& cfg, const TrainingSet& data, const TrainHooks& hooks = {});

// Non-overlapped slicing, per-slice masking, concatenation and trim; latent
// noise is off and batch norm uses running statistics.
AudioBuffer enhance(const TrainConfig& cfg, const ParamSet& generator, const AudioBuffer& noisy);
AudioBuffer enhance(const Checkpoint& ckpt, const AudioBuffer& noisy);

}  // namespace c2f
