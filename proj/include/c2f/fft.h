// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace c2f {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n);

// In-place iterative radix-2 transform. Forward uses exp(-2*pi*i*k*n/N);
// inverse is unnormalized (caller divides by N).
class ComplexFft {
 public:
  explicit ComplexFft(std::size_t n);

  std::size_t size() const { return n_; }
  void forward(std::span<Complex> data) const;
  void inverse(std::span<Complex> data) const;

 private:
  void transform(std::span<Complex> data, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bit_reverse_;
  std::vector<Complex> twiddles_;  // exp(-2*pi*i*k/N), k < N/2
};

// Real-input transform producing the n/2 + 1 non-redundant bins.
class RealFft {
 public:
  explicit RealFft(std::size_t n);

  std::size_t size() const { return fft_.size(); }
  std::size_t bins() const { return fft_.size() / 2 + 1; }

  // out.size() == bins()
  void forward(std::span<const double> in, std::span<Complex> out) const;
  // Hermitian-extends `in` (imaginary parts of DC and Nyquist ignored) and
  // returns the real inverse, normalized by 1/n.
  void inverse(std::span<const Complex> in, std::span<double> out) const;

 private:
  ComplexFft fft_;
  mutable std::vector<Complex> scratch_;
};

}  // namespace c2f
