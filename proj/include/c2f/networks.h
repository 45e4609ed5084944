// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "c2f/array.h"
#include "c2f/losses.h"
#include "c2f/ops.h"
#include "c2f/spectral.h"
#include "c2f/tape.h"

namespace c2f {

// One conv (encoder) or transposed-conv (decoder) block:
// conv -> batch norm -> leaky ReLU.
struct BlockSpec {
  std::size_t out_channels = 16;
  std::size_t kernel_h = 3, kernel_w = 4;
  std::size_t stride_h = 1, stride_w = 2;
  std::size_t pad_h = 1, pad_w = 1;

  ag::Conv2dGeometry geometry() const { return {stride_h, stride_w, pad_h, pad_w}; }
};

struct LatentNoise {
  bool enabled = false;
  double mean = 0.0;
  double variance = 0.01;
};

// Encoder-decoder mask estimator. The decoder mirrors the encoder block by
// block (same kernels and strides, transposed), optionally concatenating the
// matching encoder activation, and a 1x1 head maps to the 2 mask channels.
struct GeneratorConfig {
  std::vector<BlockSpec> encoder;
  bool skip_connections = true;
  LatentNoise latent;
  double leaky_slope = 0.2;
  // Network input is S * |S|^(p - 1); 1 feeds the raw spectrum.
  double input_power = 1.0;

  std::size_t n_decoder_blocks() const { return encoder.size(); }
  // Cumulative stride along (frames, bins).
  std::size_t frame_stride() const;
  std::size_t bin_stride() const;

  void validate() const;
  static GeneratorConfig desk_default();
};

struct HeadConvSpec {
  std::size_t out_channels = 32;
  std::size_t kernel_h = 3, kernel_w = 5;
  std::size_t pad_h = 1, pad_w = 2;
};

// Siamese discriminator: a shared encoder backbone applied to the candidate
// and the condition, channel concatenation, two un-normalized convs and a
// fully connected layer to one score.
struct DiscriminatorConfig {
  std::vector<BlockSpec> backbone;
  std::vector<HeadConvSpec> head;
  std::vector<int> tap_layers;  // 1-based backbone block indices, deep -> shallow
  double leaky_slope = 0.2;
  double input_power = 1.0;

  void validate() const;
  static DiscriminatorConfig desk_default(const GeneratorConfig& generator);
};

// Trainable tensors plus batch-norm running statistics, keyed by layer path.
struct ParamSet {
  std::map<std::string, ag::Array> params;
  std::map<std::string, ag::Array> buffers;

  std::size_t parameter_count() const;
  bool operator==(const ParamSet& other) const;
};

// Masks and features run over bins [0, 512) of a 1024-point transform; the
// Nyquist bin reuses the mask of bin 511.
struct GridShape {
  std::size_t frames = 0;
  std::size_t bins = 0;  // network bins (transform bins - 1)
};

GridShape network_grid(const StftConfig& stft, std::size_t slice_len);

ParamSet init_generator(const GeneratorConfig& cfg, std::uint64_t seed);
ParamSet init_discriminator(const DiscriminatorConfig& cfg, const GridShape& grid, std::uint64_t seed);

// Tape handles for every parameter of a ParamSet.
struct Binding {
  std::map<std::string, ag::Var> vars;
  ag::Var at(const std::string& key) const;
};

// trainable = true registers parameter nodes (named by key); false binds
// constants so no gradient flows into this set.
Binding bind(ag::Tape& tape, const ParamSet& params, bool trainable);

using BatchNormUpdates = std::map<std::string, ag::BatchNormStats>;

struct ForwardOptions {
  bool training = true;
  // Running statistics for inference mode.
  const ParamSet* state = nullptr;
  // Training mode collects per-layer batch statistics here when non-null.
  BatchNormUpdates* bn_updates = nullptr;
};

// running <- momentum * running + (1 - momentum) * batch
void apply_batch_norm_updates(ParamSet& params, const BatchNormUpdates& updates, double momentum = 0.9);

// Noisy spectra as (N, 2, frames, transform_bins) re/im planes.
ag::Array spectra_to_planes(const std::vector<ComplexSpectrogram>& specs);

struct GeneratorOutput {
  ag::Var mask;           // (N, 2, frames, transform_bins), components in (-1, 1)
  ag::Var enhanced_spec;  // noisy * mask
  ag::Var enhanced_wave;  // (N, samples)
};

GeneratorOutput generator_forward(ag::Tape& tape, const Binding& params, const GeneratorConfig& cfg,
                                  const StftConfig& stft, const ag::Array& noisy_planes,
                                  const ForwardOptions& opts, std::optional<std::uint64_t> z_seed = std::nullopt);

struct DiscriminatorOutput {
  ag::Var score;  // (N, 1)
  TapMap taps;    // candidate-branch activations keyed by backbone layer
};

// Candidate and condition are (N, 2, frames, transform_bins) planes.
DiscriminatorOutput discriminator_forward(ag::Tape& tape, const Binding& params,
                                          const DiscriminatorConfig& cfg, ag::Var candidate,
                                          ag::Var condition, const ForwardOptions& opts);

}  // namespace c2f
