// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "c2f/dataset.h"
#include "c2f/signal_io.h"
#include "c2f/trainer.h"

namespace c2f::test {

// 64/16 STFT, 256-sample slices: a 13 x 32 grid the tiny nets can stride.
inline TrainConfig tiny_train_config() {
  TrainConfig c;
  c.stft = StftConfig(64, 16);
  c.slice_len = 256;
  c.slice_stride = 256;
  c.batch_size = 4;
  c.epochs = 4;
  c.lr_schedule.clear();
  c.generator.encoder = {BlockSpec{4, 3, 4, 1, 2, 1, 1}, BlockSpec{6, 3, 4, 1, 2, 1, 1}};
  c.discriminator.backbone = {BlockSpec{4, 3, 4, 1, 2, 1, 1}, BlockSpec{5, 3, 4, 2, 2, 1, 1},
                              BlockSpec{6, 3, 4, 1, 2, 1, 1}};
  c.discriminator.head = {HeadConvSpec{3, 3, 5, 1, 2}, HeadConvSpec{2, 1, 1, 0, 0}};
  c.discriminator.tap_layers = {3, 1};
  c.granularity.g_start = 256;
  c.granularity.g_min = 32;
  c.granularity.period = 2;
  c.dpl = DplSchedule{true, 2, {3, 1}, DplComposition::kAdd};
  return c;
}

// `pairs` synthetic utterances of `len` samples mixed at 5 dB white/pink noise.
inline std::vector<LoadedPair> toy_pairs(std::size_t pairs, std::size_t len, std::uint64_t seed = 11) {
  std::vector<LoadedPair> out;
  for (std::size_t i = 0; i < pairs; ++i) {
    AudioBuffer c = synth_clean_samples(len, {}, seed + 2 * i);
    AudioBuffer n = synth_noise(i % 2 ? NoiseKind::kPink : NoiseKind::kWhite, len, seed + 2 * i + 1);
    NoisyPair p = mix_at_snr(c, n, 5.0);
    LoadedPair lp;
    lp.entry.id = "toy" + std::to_string(i);
    lp.entry.snr_db = 5.0;
    lp.clean = p.clean;
    lp.noisy = p.noisy;
    out.push_back(std::move(lp));
  }
  return out;
}

}  // namespace c2f::test
