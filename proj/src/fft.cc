// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/fft.h"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace c2f {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

ComplexFft::ComplexFft(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("fft size must be a power of two, got " + std::to_string(n));
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  bit_reverse_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    }
    bit_reverse_[i] = r;
  }
  twiddles_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddles_[k] = Complex(std::cos(angle), std::sin(angle));
  }
}

void ComplexFft::forward(std::span<Complex> data) const { transform(data, false); }
void ComplexFft::inverse(std::span<Complex> data) const { transform(data, true); }

void ComplexFft::transform(std::span<Complex> data, bool inverse) const {
  if (data.size() != n_) throw std::invalid_argument("fft input size mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    std::size_t j = bit_reverse_[i];
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    std::size_t half = len / 2;
    std::size_t step = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        Complex w = twiddles_[k * step];
        if (inverse) w = std::conj(w);
        Complex a = data[start + k];
        Complex b = data[start + k + half] * w;
        data[start + k] = a + b;
        data[start + k + half] = a - b;
      }
    }
  }
}

RealFft::RealFft(std::size_t n) : fft_(n), scratch_(n) {}

void RealFft::forward(std::span<const double> in, std::span<Complex> out) const {
  const std::size_t n = size();
  if (in.size() != n || out.size() != bins()) throw std::invalid_argument("rfft size mismatch");
  for (std::size_t i = 0; i < n; ++i) scratch_[i] = Complex(in[i], 0.0);
  fft_.forward(scratch_);
  for (std::size_t k = 0; k < bins(); ++k) out[k] = scratch_[k];
}

void RealFft::inverse(std::span<const Complex> in, std::span<double> out) const {
  const std::size_t n = size();
  if (in.size() != bins() || out.size() != n) throw std::invalid_argument("irfft size mismatch");
  const std::size_t half = n / 2;
  scratch_[0] = Complex(in[0].real(), 0.0);
  scratch_[half] = Complex(in[half].real(), 0.0);
  for (std::size_t k = 1; k < half; ++k) {
    scratch_[k] = in[k];
    scratch_[n - k] = std::conj(in[k]);
  }
  fft_.inverse(scratch_);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = scratch_[i].real() * scale;
}

}  // namespace c2f
