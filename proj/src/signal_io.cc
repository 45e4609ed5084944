// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/signal_io.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "c2f/errors.h"
#include "c2f/fft.h"
#include "c2f/hash.h"

namespace c2f {

void validate(const AudioBuffer& buffer, std::string_view what) {
  if (buffer.empty()) throw DataError(fmt::format("{}: empty buffer", what));
  if (buffer.sample_rate != kSampleRate) {
    throw DataError(fmt::format("{}: sample rate {} != {}", what, buffer.sample_rate, kSampleRate));
  }
  for (double v : buffer.samples) {
    if (!std::isfinite(v)) throw DataError(fmt::format("{}: non-finite sample", what));
  }
}

namespace {

double sum_squares(const std::vector<double>& samples) {
  double acc = 0.0;
  for (double v : samples) acc += v * v;
  return acc;
}

}  // namespace

double mean_power(const std::vector<double>& samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double v : samples) acc += v * v;
  return acc / static_cast<double>(samples.size());
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kWhite: return "white";
    case NoiseKind::kPink: return "pink";
    case NoiseKind::kBabble: return "babble";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "white") return NoiseKind::kWhite;
  if (name == "pink") return NoiseKind::kPink;
  if (name == "babble" || name == "babble-like") return NoiseKind::kBabble;
  throw ConfigError(fmt::format("unknown noise kind '{}'", name));
}

// ---------------------------------------------------------------------------
// WAV

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError(fmt::format("'{}': not a RIFF/WAVE file", path.string()));
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    std::uint32_t size = le32(chunk + 4);
    std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Tolerate a truncated final data chunk by clamping to the file size.
      if (std::memcmp(chunk, "data", 4) == 0) size = static_cast<std::uint32_t>(bytes.size() - body);
      else throw DataError(fmt::format("'{}': truncated chunk", path.string()));
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw DataError(fmt::format("'{}': short fmt chunk", path.string()));
      const unsigned char* f = bytes.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      bits = le16(f + 14);
      if (format == kFormatExtensible && size >= 26) format = le16(f + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || data == nullptr) {
    throw DataError(fmt::format("'{}': missing fmt or data chunk", path.string()));
  }
  if (channels != 1) {
    throw DataError(fmt::format("'{}': unsupported channel count {}", path.string(), channels));
  }
  if (rate != static_cast<std::uint32_t>(kSampleRate)) {
    throw DataError(fmt::format("'{}': sample rate {} != {} (no resampling)", path.string(),
                                rate, kSampleRate));
  }

  AudioBuffer out;
  out.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    std::size_t n = data_size / 2;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = static_cast<std::int16_t>(le16(data + 2 * i));
      out.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    std::size_t n = data_size / 4;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = static_cast<double>(std::bit_cast<float>(le32(data + 4 * i)));
    }
  } else {
    throw DataError(fmt::format("'{}': unsupported encoding (format {}, {} bits)", path.string(),
                                format, bits));
  }
  return out;
}

WavWriteStats write_wav(const std::filesystem::path& path, const AudioBuffer& buffer,
                        WavEncoding encoding) {
  for (double v : buffer.samples) {
    if (!std::isfinite(v)) throw DataError("write_wav: non-finite sample");
  }
  WavWriteStats stats;
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint16_t block_align = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(buffer.samples.size() * block_align);

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, pcm ? kFormatPcm : kFormatFloat);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(buffer.sample_rate));
  put32(out, static_cast<std::uint32_t>(buffer.sample_rate) * block_align);
  put16(out, block_align);
  put16(out, bits);
  put_tag(out, "data");
  put32(out, data_size);
  for (double v : buffer.samples) {
    if (pcm) {
      if (v > 1.0 || v < -1.0) ++stats.clipped;
      double q = std::round(v * 32768.0);
      q = std::clamp(q, -32768.0, 32767.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError(fmt::format("cannot write '{}'", path.string()));
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError(fmt::format("write failed for '{}'", path.string()));
  if (stats.clipped > 0) {
    spdlog::warn("write_wav '{}': clipped {} samples", path.string(), stats.clipped);
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Synthesis

AudioBuffer synth_clean(double duration_s, const VoiceProfile& profile, std::uint64_t seed) {
  if (!(duration_s > 0.0)) throw DataError("synth_clean: duration must be positive");
  auto length = static_cast<std::size_t>(std::llround(duration_s * kSampleRate));
  return synth_clean_samples(std::max<std::size_t>(length, 1), profile, seed);
}

AudioBuffer synth_clean_samples(std::size_t length, const VoiceProfile& profile,
                                std::uint64_t seed) {
  if (length == 0) throw DataError("synth_clean: length must be positive");
  std::mt19937_64 rng(mix_seed(seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double fs = kSampleRate;

  AudioBuffer out;
  out.samples.assign(length, 0.0);
  auto cursor = static_cast<std::size_t>(uniform(0.0, 0.05) * fs);
  while (cursor < length) {
    auto syllable = static_cast<std::size_t>(uniform(profile.syllable_min_s, profile.syllable_max_s) * fs);
    syllable = std::max<std::size_t>(syllable, 16);
    const double f0_start = uniform(profile.f0_min_hz, profile.f0_max_hz);
    const double f0_end = std::clamp(f0_start * uniform(0.85, 1.15), profile.f0_min_hz,
                                     profile.f0_max_hz);
    const int harmonics = profile.harmonics_min +
                          static_cast<int>(unit(rng) * (profile.harmonics_max - profile.harmonics_min + 1));
    const double rolloff = uniform(0.5, 1.5);
    const double level = uniform(0.3, 1.0);
    std::vector<double> amp(static_cast<std::size_t>(harmonics));
    std::vector<double> phase(static_cast<std::size_t>(harmonics));
    for (int h = 0; h < harmonics; ++h) {
      amp[static_cast<std::size_t>(h)] = uniform(0.5, 1.0) / std::pow(h + 1.0, rolloff);
      phase[static_cast<std::size_t>(h)] = uniform(0.0, 2.0 * std::numbers::pi);
    }
    const double attack = uniform(0.1, 0.3);
    const double release = uniform(0.2, 0.4);
    double theta = 0.0;
    for (std::size_t i = 0; i < syllable && cursor + i < length; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(syllable);
      const double f0 = f0_start + (f0_end - f0_start) * u;
      theta += 2.0 * std::numbers::pi * f0 / fs;
      double env = 1.0;
      if (u < attack) env = 0.5 - 0.5 * std::cos(std::numbers::pi * u / attack);
      else if (u > 1.0 - release) env = 0.5 - 0.5 * std::cos(std::numbers::pi * (1.0 - u) / release);
      double v = 0.0;
      for (int h = 0; h < harmonics; ++h) {
        if (f0 * (h + 1) >= 0.45 * fs) break;
        v += amp[static_cast<std::size_t>(h)] * std::sin((h + 1) * theta + phase[static_cast<std::size_t>(h)]);
      }
      out.samples[cursor + i] += level * env * v;
    }
    cursor += syllable + static_cast<std::size_t>(uniform(profile.gap_min_s, profile.gap_max_s) * fs);
  }

  double peak = 0.0;
  for (double v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    const double target = profile.peak * uniform(0.5, 1.0);
    const double scale = target / peak;
    for (double& v : out.samples) v *= scale;
  }
  return out;
}

namespace {

void normalize_rms(std::vector<double>& samples, std::string_view what) {
  const double power = mean_power(samples);
  if (!(power > 0.0)) throw DataError(fmt::format("synth_noise: {} noise has zero power", what));
  const double scale = 1.0 / std::sqrt(power);
  for (double& v : samples) v *= scale;
}

}  // namespace

AudioBuffer synth_noise(NoiseKind kind, std::size_t length, std::uint64_t seed) {
  if (length == 0) throw DataError("synth_noise: length must be positive");
  AudioBuffer out;
  switch (kind) {
    case NoiseKind::kWhite: {
      std::mt19937_64 rng(mix_seed(seed));
      std::normal_distribution<double> gauss(0.0, 1.0);
      out.samples.resize(length);
      for (double& v : out.samples) v = gauss(rng);
      break;
    }
    case NoiseKind::kPink: {
      // Spectral shaping: bin amplitude ~ 1/sqrt(k) gives power ~ 1/f.
      std::size_t n = 2;
      while (n < length) n <<= 1;
      std::mt19937_64 rng(mix_seed(seed ^ 0x70696e6bULL));
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::vector<Complex> bins(n / 2 + 1, Complex(0.0, 0.0));
      for (std::size_t k = 1; k <= n / 2; ++k) {
        const double a = 1.0 / std::sqrt(static_cast<double>(k));
        const double re = gauss(rng);
        const double im = gauss(rng);
        bins[k] = Complex(a * re, k == n / 2 ? 0.0 : a * im);
      }
      std::vector<double> time(n);
      RealFft(n).inverse(bins, time);
      out.samples.assign(time.begin(), time.begin() + static_cast<std::ptrdiff_t>(length));
      break;
    }
    case NoiseKind::kBabble: {
      VoiceProfile profile;
      out.samples.assign(length, 0.0);
      for (std::uint64_t voice = 0; voice < 6; ++voice) {
        AudioBuffer v = synth_clean_samples(length, profile, derive_seed(seed, {0x626162ULL, voice}));
        for (std::size_t i = 0; i < length; ++i) out.samples[i] += v.samples[i];
      }
      break;
    }
  }
  normalize_rms(out.samples, to_string(kind));
  return out;
}

// ---------------------------------------------------------------------------
// Mixing

namespace {

double snap(double v, double quantum) { return std::round(v / quantum) * quantum; }

}  // namespace

NoisyPair mix_at_snr(const AudioBuffer& clean, const AudioBuffer& noise, double snr_db,
                     const MixOptions& options) {
  if (clean.size() != noise.size()) {
    throw DataError(fmt::format("mix_at_snr: length mismatch {} vs {}", clean.size(), noise.size()));
  }
  if (clean.sample_rate != noise.sample_rate) throw DataError("mix_at_snr: sample rate mismatch");
  if (!std::isfinite(snr_db)) throw DataError("mix_at_snr: non-finite snr");

  NoisyPair pair;
  pair.snr_db = snr_db;
  pair.clean = clean;
  if (options.quantum > 0.0) {
    for (double& v : pair.clean.samples) v = snap(v, options.quantum);
  }
  const double clean_power = mean_power(pair.clean.samples);
  const double noise_power = mean_power(noise.samples);
  if (!(clean_power > 0.0)) throw DataError("mix_at_snr: clean signal has zero power");
  if (!(noise_power > 0.0)) throw DataError("mix_at_snr: noise has zero power");

  const double target_noise_power = clean_power / std::pow(10.0, snr_db / 10.0);
  double gain = std::sqrt(target_noise_power / noise_power);
  std::vector<double> scaled(noise.size());
  auto render = [&] {
    for (std::size_t i = 0; i < scaled.size(); ++i) {
      scaled[i] = gain * noise.samples[i];
      if (options.quantum > 0.0) scaled[i] = snap(scaled[i], options.quantum);
    }
  };
  render();
  if (options.quantum > 0.0) {
    // Newton refinement of the gain against the snapped noise power.
    for (int iter = 0; iter < 12; ++iter) {
      const double achieved = mean_power(scaled);
      if (!(achieved > 0.0)) throw DataError("mix_at_snr: quantized noise vanished");
      const double err_db = 10.0 * std::log10(achieved / target_noise_power);
      if (std::abs(err_db) < 1e-12) break;
      gain *= std::sqrt(target_noise_power / achieved);
      render();
    }
    // The gain alone moves the snapped power in steps of ~1e-10 relative.
    // Finish by moving single samples one quantum, picking the sample whose
    // power change best matches the residual.
    const double q = options.quantum;
    const double target_sum = sum_squares(pair.clean.samples) / std::pow(10.0, snr_db / 10.0);
    for (int iter = 0; iter < 64; ++iter) {
      const double achieved = sum_squares(scaled);
      const double residual = target_sum - achieved;
      if (std::abs(10.0 * std::log10(achieved / target_sum)) < 1e-13) break;
      std::size_t best = 0;
      double best_gap = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < scaled.size(); ++i) {
        const double a = std::abs(scaled[i]);
        if (residual < 0.0 && a < q) continue;
        const double delta = residual > 0.0 ? 2.0 * a * q + q * q : -2.0 * a * q + q * q;
        const double gap = std::abs(residual - delta);
        if (gap < best_gap) {
          best_gap = gap;
          best = i;
        }
      }
      const double dir = (scaled[best] < 0.0 ? -1.0 : 1.0) * (residual > 0.0 ? 1.0 : -1.0);
      scaled[best] = snap(scaled[best] + dir * q, q);
    }
  }

  pair.noise_gain = gain;
  pair.noisy.sample_rate = clean.sample_rate;
  pair.noisy.samples.resize(scaled.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) pair.noisy.samples[i] = pair.clean.samples[i] + scaled[i];
  return pair;
}

SliceSet slice_utterance(const AudioBuffer& buffer, std::size_t slice_len, std::size_t stride,
                         SliceMode mode) {
  if (buffer.empty()) throw DataError("slice_utterance: empty buffer");
  if (slice_len == 0) throw ConfigError("slice_utterance: slice_len must be positive");
  if (mode == SliceMode::kNonOverlapped) stride = slice_len;
  if (stride == 0) throw ConfigError("slice_utterance: stride must be positive");
  if (stride > slice_len) throw ConfigError("slice_utterance: overlapped mode requires stride <= slice_len");

  SliceSet set;
  set.slice_len = slice_len;
  set.stride = stride;
  set.source_len = buffer.size();
  std::size_t last_end = 0;
  for (std::size_t offset = 0; offset < buffer.size(); offset += stride) {
    std::vector<double> window(slice_len, 0.0);
    const std::size_t n = std::min(slice_len, buffer.size() - offset);
    std::copy_n(buffer.samples.begin() + static_cast<std::ptrdiff_t>(offset), n, window.begin());
    set.slices.push_back(std::move(window));
    last_end = offset + slice_len;
  }
  set.pad_tail = last_end - buffer.size();
  return set;
}

std::vector<double> join_slices(const SliceSet& set) {
  if (set.stride != set.slice_len) throw ConfigError("join_slices: requires non-overlapped slices");
  std::vector<double> out;
  out.reserve(set.slices.size() * set.slice_len);
  for (const auto& s : set.slices) out.insert(out.end(), s.begin(), s.end());
  out.resize(out.size() - set.pad_tail);
  return out;
}

}  // namespace c2f
