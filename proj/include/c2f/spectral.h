// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "c2f/fft.h"
#include "c2f/signal_io.h"

namespace c2f {

enum class WindowKind { kPeriodicHann, kRectangular };

std::string to_string(WindowKind kind);
WindowKind parse_window_kind(const std::string& name);

// Frame geometry of the analysis/synthesis pair. Construction checks that the
// squared window overlap-adds to a constant at the chosen hop.
class StftConfig {
 public:
  StftConfig() : StftConfig(1024, 256, WindowKind::kPeriodicHann) {}
  StftConfig(std::size_t window_len, std::size_t hop,
             WindowKind kind = WindowKind::kPeriodicHann);

  std::size_t window_len() const { return window_len_; }
  std::size_t fft_len() const { return window_len_; }
  std::size_t hop() const { return hop_; }
  std::size_t bins() const { return window_len_ / 2 + 1; }
  WindowKind window_kind() const { return kind_; }
  const std::vector<double>& window() const { return window_; }

  // Envelope values below this are clamped before division in istft; only
  // the first and last hop of a signal can fall under it.
  double envelope_floor() const { return envelope_floor_; }

  std::size_t frame_count(std::size_t samples) const;
  std::size_t signal_length(std::size_t frames) const { return (frames - 1) * hop_ + window_len_; }

  // Accumulated squared synthesis window for `frames` frames, floored.
  std::vector<double> synthesis_envelope(std::size_t frames) const;

 private:
  std::size_t window_len_;
  std::size_t hop_;
  WindowKind kind_;
  std::vector<double> window_;
  double envelope_floor_ = 1e-3;
};

// frames x bins complex grid, row-major by frame.
class ComplexSpectrogram {
 public:
  ComplexSpectrogram() = default;
  ComplexSpectrogram(std::size_t frames, std::size_t bins);

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  Complex& at(std::size_t frame, std::size_t bin) { return data_[frame * bins_ + bin]; }
  const Complex& at(std::size_t frame, std::size_t bin) const { return data_[frame * bins_ + bin]; }
  std::span<Complex> frame(std::size_t f) { return {data_.data() + f * bins_, bins_}; }
  std::span<const Complex> frame(std::size_t f) const { return {data_.data() + f * bins_, bins_}; }
  const std::vector<Complex>& data() const { return data_; }
  std::vector<Complex>& data() { return data_; }

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::vector<Complex> data_;
};

// Complex ratio mask; components are expected in (-1, 1).
struct ComplexMask {
  ComplexSpectrogram values;

  // Throws DataError if any component leaves the open interval (-1, 1).
  void check_bounds() const;
};

ComplexSpectrogram stft(const AudioBuffer& buffer, const StftConfig& cfg);
ComplexSpectrogram stft(std::span<const double> samples, const StftConfig& cfg);
AudioBuffer istft(const ComplexSpectrogram& spec, const StftConfig& cfg);

// Adjoint of istft with respect to the (re, im) values of every cell, given
// d(loss)/d(output). Used by the differentiable inverse transform.
void istft_adjoint(std::span<const double> grad_out, const StftConfig& cfg, std::size_t frames,
                   std::span<double> grad_re, std::span<double> grad_im);

ComplexSpectrogram apply_mask(const ComplexSpectrogram& spec, const ComplexMask& mask);

// "frame,bin,re,im" rows with a header line.
void dump_spectrogram(std::ostream& out, const ComplexSpectrogram& spec);

}  // namespace c2f
