// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/spectral.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

#include "c2f/errors.h"

namespace c2f {

namespace {

const RealFft& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, RealFft> plans;
  auto it = plans.find(n);
  if (it == plans.end()) it = plans.emplace(n, RealFft(n)).first;
  return it->second;
}

}  // namespace

std::string to_string(WindowKind kind) {
  return kind == WindowKind::kPeriodicHann ? "hann" : "rectangular";
}

WindowKind parse_window_kind(const std::string& name) {
  if (name == "hann") return WindowKind::kPeriodicHann;
  if (name == "rectangular" || name == "rect") return WindowKind::kRectangular;
  throw ConfigError(fmt::format("unknown window kind '{}'", name));
}

StftConfig::StftConfig(std::size_t window_len, std::size_t hop, WindowKind kind)
    : window_len_(window_len), hop_(hop), kind_(kind) {
  if (!is_power_of_two(window_len)) {
    throw ConfigError(fmt::format("stft window {} is not a power of two", window_len));
  }
  if (hop == 0 || window_len % hop != 0) {
    throw ConfigError(fmt::format("stft hop {} does not divide window {}", hop, window_len));
  }
  window_.resize(window_len);
  for (std::size_t n = 0; n < window_len; ++n) {
    window_[n] = kind == WindowKind::kPeriodicHann
                     ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                            static_cast<double>(window_len))
                     : 1.0;
  }
  // Squared-window overlap-add must be flat across one hop period.
  std::vector<double> folded(hop, 0.0);
  for (std::size_t n = 0; n < window_len; ++n) folded[n % hop] += window_[n] * window_[n];
  const auto [lo, hi] = std::minmax_element(folded.begin(), folded.end());
  if (*hi - *lo > 1e-10) {
    throw ConfigError(fmt::format("window '{}' is not overlap-add constant at hop {} (deviation {:g})",
                                  to_string(kind), hop, *hi - *lo));
  }
}

std::size_t StftConfig::frame_count(std::size_t samples) const {
  if (samples < window_len_) return 0;
  return (samples - window_len_) / hop_ + 1;
}

std::vector<double> StftConfig::synthesis_envelope(std::size_t frames) const {
  std::vector<double> env(signal_length(frames), 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t n = 0; n < window_len_; ++n) env[f * hop_ + n] += window_[n] * window_[n];
  }
  for (double& e : env) e = std::max(e, envelope_floor_);
  return env;
}

ComplexSpectrogram::ComplexSpectrogram(std::size_t frames, std::size_t bins)
    : frames_(frames), bins_(bins), data_(frames * bins, Complex(0.0, 0.0)) {}

void ComplexMask::check_bounds() const {
  for (const Complex& c : values.data()) {
    if (!(std::abs(c.real()) < 1.0) || !(std::abs(c.imag()) < 1.0)) {
      throw DataError(fmt::format("mask component out of (-1, 1): ({}, {})", c.real(), c.imag()));
    }
  }
}

ComplexSpectrogram stft(const AudioBuffer& buffer, const StftConfig& cfg) {
  return stft(std::span<const double>(buffer.samples), cfg);
}

ComplexSpectrogram stft(std::span<const double> samples, const StftConfig& cfg) {
  const std::size_t n = cfg.window_len();
  if (samples.size() < n) {
    throw DataError(fmt::format("stft: buffer of {} samples is shorter than one window ({})",
                                samples.size(), n));
  }
  const std::size_t frames = cfg.frame_count(samples.size());
  ComplexSpectrogram spec(frames, cfg.bins());
  const RealFft& fft = plan_for(n);
  std::vector<double> frame(n);
  const auto& w = cfg.window();
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * cfg.hop();
    for (std::size_t i = 0; i < n; ++i) frame[i] = samples[start + i] * w[i];
    fft.forward(frame, spec.frame(f));
  }
  return spec;
}

AudioBuffer istft(const ComplexSpectrogram& spec, const StftConfig& cfg) {
  if (spec.bins() != cfg.bins() || spec.frames() == 0) {
    throw DataError(fmt::format("istft: spectrogram {}x{} inconsistent with config ({} bins)",
                                spec.frames(), spec.bins(), cfg.bins()));
  }
  const std::size_t n = cfg.window_len();
  const RealFft& fft = plan_for(n);
  AudioBuffer out;
  out.samples.assign(cfg.signal_length(spec.frames()), 0.0);
  std::vector<double> frame(n);
  const auto& w = cfg.window();
  for (std::size_t f = 0; f < spec.frames(); ++f) {
    fft.inverse(spec.frame(f), frame);
    const std::size_t start = f * cfg.hop();
    for (std::size_t i = 0; i < n; ++i) out.samples[start + i] += w[i] * frame[i];
  }
  const std::vector<double> env = cfg.synthesis_envelope(spec.frames());
  for (std::size_t t = 0; t < out.samples.size(); ++t) out.samples[t] /= env[t];
  return out;
}

void istft_adjoint(std::span<const double> grad_out, const StftConfig& cfg, std::size_t frames,
                   std::span<double> grad_re, std::span<double> grad_im) {
  const std::size_t n = cfg.window_len();
  const std::size_t bins = cfg.bins();
  if (grad_out.size() != cfg.signal_length(frames) || grad_re.size() != frames * bins ||
      grad_im.size() != frames * bins) {
    throw DataError("istft_adjoint: size mismatch");
  }
  const RealFft& fft = plan_for(n);
  const std::vector<double> env = cfg.synthesis_envelope(frames);
  const auto& w = cfg.window();
  std::vector<double> frame(n);
  std::vector<Complex> spectrum(bins);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * cfg.hop();
    for (std::size_t i = 0; i < n; ++i) frame[i] = w[i] * grad_out[start + i] / env[start + i];
    fft.forward(frame, spectrum);
    // Transpose of the Hermitian-extended inverse: interior bins count twice,
    // imaginary parts of DC and Nyquist are discarded by the forward map.
    for (std::size_t k = 0; k < bins; ++k) {
      const bool edge = k == 0 || k == bins - 1;
      const double c = edge ? inv_n : 2.0 * inv_n;
      grad_re[f * bins + k] = c * spectrum[k].real();
      grad_im[f * bins + k] = edge ? 0.0 : c * spectrum[k].imag();
    }
  }
}

ComplexSpectrogram apply_mask(const ComplexSpectrogram& spec, const ComplexMask& mask) {
  if (spec.frames() != mask.values.frames() || spec.bins() != mask.values.bins()) {
    throw DataError(fmt::format("apply_mask: spectrogram {}x{} vs mask {}x{}", spec.frames(),
                                spec.bins(), mask.values.frames(), mask.values.bins()));
  }
  ComplexSpectrogram out(spec.frames(), spec.bins());
  for (std::size_t i = 0; i < spec.data().size(); ++i) {
    out.data()[i] = spec.data()[i] * mask.values.data()[i];
  }
  return out;
}

void dump_spectrogram(std::ostream& out, const ComplexSpectrogram& spec) {
  out << "frame,bin,re,im\n";
  for (std::size_t f = 0; f < spec.frames(); ++f) {
    for (std::size_t k = 0; k < spec.bins(); ++k) {
      const Complex& c = spec.at(f, k);
      out << fmt::format("{},{},{},{}\n", f, k, c.real(), c.imag());
    }
  }
}

}  // namespace c2f
