// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "c2f/errors.h"
#include "c2f/spectral.h"

using namespace c2f;

namespace {

AudioBuffer random_signal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  AudioBuffer b;
  b.samples.resize(n);
  for (double& v : b.samples) v = g(rng);
  return b;
}

// Naive DFT of one windowed frame.
std::vector<Complex> dft_frame(const std::vector<double>& x, std::size_t off, const std::vector<double>& w) {
  const std::size_t n = w.size();
  std::vector<Complex> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    Complex acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += w[i] * x[off + i] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * i % n) / n);
    }
    out[k] = acc;
  }
  return out;
}

double interior_rel_rms(const std::vector<double>& a, const std::vector<double>& b, std::size_t skip) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = skip; i + skip < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += a[i] * a[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("config geometry and rejection of non-COLA hops") {
  StftConfig cfg;
  CHECK(cfg.window_len() == 1024);
  CHECK(cfg.hop() == 256);
  CHECK(cfg.bins() == 513);
  CHECK(cfg.frame_count(4096) == 13);
  CHECK_THROWS_AS(StftConfig(1024, 300), ConfigError);
  CHECK_THROWS_AS(StftConfig(1000, 250), ConfigError);
}

TEST_CASE("frame grid of a 4096-sample buffer is 13 x 513") {
  ComplexSpectrogram s = stft(random_signal(4096, 1), StftConfig());
  CHECK(s.frames() == 13);
  CHECK(s.bins() == 513);
}

TEST_CASE("zero signal gives a zero spectrogram and back") {
  AudioBuffer z;
  z.samples.assign(3000, 0.0);
  StftConfig cfg;
  ComplexSpectrogram s = stft(z, cfg);
  for (const Complex& c : s.data()) CHECK(c == Complex(0.0, 0.0));
  AudioBuffer back = istft(s, cfg);
  CHECK(back.size() == cfg.signal_length(s.frames()));
  for (double v : back.samples) CHECK(v == 0.0);
}

TEST_CASE("short buffer is rejected") {
  CHECK_THROWS_AS(stft(random_signal(1000, 2), StftConfig()), DataError);
}

TEST_CASE("bin-centred cosine with a rectangular window lands in one bin") {
  StftConfig cfg(1024, 1024, WindowKind::kRectangular);
  const std::size_t k = 37;
  AudioBuffer b;
  for (std::size_t i = 0; i < 1024; ++i) b.samples.push_back(std::cos(2.0 * std::numbers::pi * k * i / 1024.0));
  ComplexSpectrogram s = stft(b, cfg);
  const double peak = std::abs(s.at(0, k));
  CHECK(peak == doctest::Approx(512.0).epsilon(1e-12));
  for (std::size_t j = 0; j < s.bins(); ++j) {
    if (j != k) CHECK(std::abs(s.at(0, j)) < 1e-10 * peak);
  }
}

TEST_CASE("stft agrees with a direct DFT on every frame") {
  StftConfig cfg(64, 16);
  AudioBuffer b = random_signal(300, 4);
  ComplexSpectrogram s = stft(b, cfg);
  for (std::size_t f = 0; f < s.frames(); ++f) {
    auto ref = dft_frame(b.samples, f * cfg.hop(), cfg.window());
    for (std::size_t k = 0; k < s.bins(); ++k) CHECK(std::abs(s.at(f, k) - ref[k]) < 1e-10);
  }
}

TEST_CASE("per-frame energy equals the windowed frame energy (Parseval)") {
  StftConfig cfg;
  AudioBuffer b = random_signal(4096, 5);
  ComplexSpectrogram s = stft(b, cfg);
  const std::size_t n = cfg.window_len();
  for (std::size_t f = 0; f < s.frames(); ++f) {
    double time = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = cfg.window()[i] * b.samples[f * cfg.hop() + i];
      time += v * v;
    }
    // One-sided spectrum: interior bins count twice.
    double freq = std::norm(s.at(f, 0)) + std::norm(s.at(f, n / 2));
    for (std::size_t k = 1; k < n / 2; ++k) freq += 2.0 * std::norm(s.at(f, k));
    CHECK(freq / n == doctest::Approx(time).epsilon(1e-12));
  }
}

TEST_CASE("round trip on 2-second signals, interior error below 1e-10") {
  StftConfig cfg;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    AudioBuffer b = random_signal(32000, seed);
    ComplexSpectrogram s = stft(b, cfg);
    AudioBuffer r = istft(s, cfg);
    REQUIRE(r.size() == cfg.signal_length(s.frames()));
    std::vector<double> src(b.samples.begin(), b.samples.begin() + r.size());
    CHECK(interior_rel_rms(src, r.samples, cfg.window_len()) < 1e-10);
  }
}

TEST_CASE("istft of one windowed-impulse frame recovers the impulse") {
  StftConfig cfg;
  const std::size_t at = 300;
  AudioBuffer imp;
  imp.samples.assign(1024, 0.0);
  imp.samples[at] = 1.0;
  ComplexSpectrogram s = stft(imp, cfg);
  REQUIRE(s.frames() == 1);
  // Inverse DFT oracle: frame = w[at] * delta(at).
  for (std::size_t i : {0u, 17u, 300u, 511u, 1000u}) {
    double acc = s.at(0, 0).real() + s.at(0, 512).real() * std::cos(std::numbers::pi * i);
    for (std::size_t k = 1; k < 512; ++k) {
      acc += 2.0 * (s.at(0, k) * std::polar(1.0, 2.0 * std::numbers::pi * double(k * i % 1024) / 1024.0)).real();
    }
    CHECK(std::abs(acc / 1024.0 - (i == at ? cfg.window()[at] : 0.0)) < 1e-10);
  }
  AudioBuffer r = istft(s, cfg);
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(std::abs(r.samples[i] - (i == at ? 1.0 : 0.0)) < 1e-10);
  }
}

TEST_CASE("stft is linear") {
  StftConfig cfg;
  AudioBuffer x = random_signal(4096, 7), y = random_signal(4096, 8), z;
  const double a = 0.7, b = -1.9;
  for (std::size_t i = 0; i < x.size(); ++i) z.samples.push_back(a * x.samples[i] + b * y.samples[i]);
  ComplexSpectrogram sx = stft(x, cfg), sy = stft(y, cfg), sz = stft(z, cfg);
  double worst = 0.0;
  for (std::size_t i = 0; i < sz.data().size(); ++i) {
    worst = std::max(worst, std::abs(sz.data()[i] - (a * sx.data()[i] + b * sy.data()[i])));
  }
  CHECK(worst < 1e-12 * 1024);
}

TEST_CASE("istft adjoint satisfies the inner-product identity") {
  StftConfig cfg(64, 16);
  const std::size_t frames = 9;
  ComplexSpectrogram s(frames, cfg.bins());
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (Complex& c : s.data()) c = {g(rng), g(rng)};
  // DC and Nyquist imaginary parts do not reach the real signal.
  for (std::size_t f = 0; f < frames; ++f) {
    s.at(f, 0).imag(0.0);
    s.at(f, cfg.bins() - 1).imag(0.0);
  }
  AudioBuffer y = istft(s, cfg);
  std::vector<double> r(y.size());
  for (double& v : r) v = g(rng);
  std::vector<double> gre(frames * cfg.bins()), gim(frames * cfg.bins());
  istft_adjoint(r, cfg, frames, gre, gim);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) lhs += y.samples[i] * r[i];
  for (std::size_t i = 0; i < gre.size(); ++i) rhs += s.data()[i].real() * gre[i] + s.data()[i].imag() * gim[i];
  CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("apply_mask identities and cell arithmetic") {
  StftConfig cfg;
  ComplexSpectrogram s = stft(random_signal(2048, 10), cfg);
  ComplexMask one{ComplexSpectrogram(s.frames(), s.bins())};
  for (Complex& c : one.values.data()) c = {1.0, 0.0};
  CHECK(apply_mask(s, one).data() == s.data());
  ComplexMask zero{ComplexSpectrogram(s.frames(), s.bins())};
  for (const Complex& c : apply_mask(s, zero).data()) CHECK(std::abs(c) == 0.0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  ComplexMask m{ComplexSpectrogram(s.frames(), s.bins())};
  for (Complex& c : m.values.data()) c = {u(rng), u(rng)};
  ComplexSpectrogram out = apply_mask(s, m);
  for (std::size_t i = 0; i < out.data().size(); i += 97) {
    const double a = s.data()[i].real(), b = s.data()[i].imag();
    const double c = m.values.data()[i].real(), d = m.values.data()[i].imag();
    CHECK(out.data()[i].real() == doctest::Approx(a * c - b * d).epsilon(1e-14));
    CHECK(out.data()[i].imag() == doctest::Approx(a * d + b * c).epsilon(1e-14));
  }
  // Scalar complex factor commutes with masking.
  const Complex k(0.3, -0.4);
  ComplexMask mk = m;
  for (Complex& c : mk.values.data()) c *= k;
  ComplexSpectrogram lhs = apply_mask(s, mk);
  for (std::size_t i = 0; i < lhs.data().size(); i += 101) {
    CHECK(std::abs(lhs.data()[i] - out.data()[i] * k) < 1e-12 * (1.0 + std::abs(lhs.data()[i])));
  }

  ComplexMask bad{ComplexSpectrogram(s.frames() + 1, s.bins())};
  CHECK_THROWS_AS(apply_mask(s, bad), DataError);
  m.values.at(0, 0) = {1.0, 0.0};
  CHECK_THROWS_AS(m.check_bounds(), DataError);
}

TEST_CASE("istft rejects a grid that does not match the config") {
  StftConfig cfg;
  ComplexSpectrogram s(4, 257);
  CHECK_THROWS_AS(istft(s, cfg), DataError);
}

TEST_CASE("debug dump lists frame,bin,re,im") {
  ComplexSpectrogram s(1, 2);
  s.at(0, 1) = {0.5, -2.0};
  std::ostringstream os;
  dump_spectrogram(os, s);
  CHECK(os.str() == "frame,bin,re,im\n0,0,0,0\n0,1,0.5,-2\n");
}
