// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace c2f {

inline constexpr int kSampleRate = 16000;

// Mono waveform. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Throws DataError when the buffer is empty, non-finite or has a bad rate.
void validate(const AudioBuffer& buffer, std::string_view what);

double mean_power(const std::vector<double>& samples);

enum class NoiseKind { kWhite, kPink, kBabble };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);

// y = x + gain * n of the additive noise model.
struct NoisyPair {
  AudioBuffer clean;
  AudioBuffer noisy;
  double snr_db = 0.0;
  double noise_gain = 0.0;
  NoiseKind noise_kind = NoiseKind::kWhite;
  std::uint64_t seed = 0;
};

enum class SliceMode { kOverlapped, kNonOverlapped };

struct SliceSet {
  std::vector<std::vector<double>> slices;
  std::size_t slice_len = 0;
  std::size_t stride = 0;
  std::size_t pad_tail = 0;
  std::size_t source_len = 0;
};

// ---------------------------------------------------------------------------
// WAV I/O

enum class WavEncoding { kPcm16, kFloat32 };

struct WavWriteStats {
  std::size_t clipped = 0;
};

// Accepts RIFF/WAVE mono 16 kHz, PCM 16-bit or IEEE float 32-bit.
AudioBuffer read_wav(const std::filesystem::path& path);

// PCM 16-bit clips samples outside [-1, 1] and reports how many; float
// 32-bit stores values unchanged.
WavWriteStats write_wav(const std::filesystem::path& path, const AudioBuffer& buffer,
                        WavEncoding encoding = WavEncoding::kPcm16);

// ---------------------------------------------------------------------------
// Synthesis

// Harmonic "voice" generator standing in for a clean speech corpus.
struct VoiceProfile {
  double f0_min_hz = 80.0;
  double f0_max_hz = 300.0;
  int harmonics_min = 3;
  int harmonics_max = 8;
  double syllable_min_s = 0.08;
  double syllable_max_s = 0.30;
  double gap_min_s = 0.03;
  double gap_max_s = 0.20;
  double peak = 0.9;
};

AudioBuffer synth_clean(double duration_s, const VoiceProfile& profile, std::uint64_t seed);
AudioBuffer synth_clean_samples(std::size_t length, const VoiceProfile& profile,
                                std::uint64_t seed);

// Unit-RMS noise of the requested kind.
AudioBuffer synth_noise(NoiseKind kind, std::size_t length, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Mixing and slicing

struct MixOptions {
  // When > 0, clean and scaled noise are snapped to multiples of `quantum`
  // and the gain is refined so the stored pair still hits the requested SNR.
  // 2^-23 makes every sample exactly representable as a 32-bit float.
  double quantum = 0.0;
};

inline constexpr double kFloat32Quantum = 1.0 / 8388608.0;

NoisyPair mix_at_snr(const AudioBuffer& clean, const AudioBuffer& noise, double snr_db,
                     const MixOptions& options = {});

SliceSet slice_utterance(const AudioBuffer& buffer, std::size_t slice_len, std::size_t stride,
                         SliceMode mode);

// Concatenates non-overlapped slices and trims the padded tail.
std::vector<double> join_slices(const SliceSet& set);

}  // namespace c2f
