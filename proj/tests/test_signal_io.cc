// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "c2f/errors.h"
#include "c2f/signal_io.h"
#include "test_util.h"

using namespace c2f;

namespace {

// Minimal hand-rolled PCM16 writer so read_wav is tested against bytes it did not produce.
void write_raw_pcm16(const std::filesystem::path& path, const std::vector<std::int16_t>& v,
                     int channels = 1, int rate = 16000) {
  std::ofstream f(path, std::ios::binary);
  auto u32 = [&](std::uint32_t x) { f.write(reinterpret_cast<const char*>(&x), 4); };
  auto u16 = [&](std::uint16_t x) { f.write(reinterpret_cast<const char*>(&x), 2); };
  const std::uint32_t data = static_cast<std::uint32_t>(v.size() * 2);
  f.write("RIFF", 4);
  u32(36 + data);
  f.write("WAVEfmt ", 8);
  u32(16);
  u16(1);
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate * 2 * channels));
  u16(static_cast<std::uint16_t>(2 * channels));
  u16(16);
  f.write("data", 4);
  u32(data);
  f.write(reinterpret_cast<const char*>(v.data()), data);
}

double snr_from_difference(const NoisyPair& p) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.clean.size(); ++i) {
    const double n = p.noisy.samples[i] - p.clean.samples[i];
    num += p.clean.samples[i] * p.clean.samples[i];
    den += n * n;
  }
  return 10.0 * std::log10(num / den);
}

}  // namespace

TEST_CASE("read_wav scales 16-bit PCM by 1/32768") {
  test::TempDir dir;
  write_raw_pcm16(dir / "a.wav", {0, 16384, -32768});
  AudioBuffer b = read_wav(dir / "a.wav");
  REQUIRE(b.size() == 3);
  CHECK(b.samples[0] == 0.0);
  CHECK(b.samples[1] == 0.5);
  CHECK(b.samples[2] == -1.0);
  CHECK(b.sample_rate == 16000);
}

TEST_CASE("read_wav rejects stereo, wrong rate, missing files and garbage") {
  test::TempDir dir;
  write_raw_pcm16(dir / "s.wav", {0, 0, 1, 1}, 2);
  CHECK_THROWS_WITH_AS(read_wav(dir / "s.wav"), doctest::Contains("unsupported channel count"), DataError);
  write_raw_pcm16(dir / "r.wav", {0, 1}, 1, 48000);
  CHECK_THROWS_AS(read_wav(dir / "r.wav"), DataError);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
  std::ofstream(dir / "junk.wav") << "not a wave file at all";
  CHECK_THROWS_AS(read_wav(dir / "junk.wav"), DataError);
}

TEST_CASE("write_wav stores PCM16 and counts clipped samples") {
  test::TempDir dir;
  AudioBuffer b;
  b.samples = {0.0, 0.5};
  CHECK(write_wav(dir / "w.wav", b).clipped == 0);
  std::ifstream f(dir / "w.wav", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() == 48);
  std::int16_t s[2];
  std::memcpy(s, bytes.data() + 44, 4);
  CHECK(s[0] == 0);
  CHECK(s[1] == 16384);

  b.samples = {1.5, -0.25};
  CHECK(write_wav(dir / "c.wav", b).clipped == 1);
  AudioBuffer back = read_wav(dir / "c.wav");
  CHECK(back.samples[0] == 32767.0 / 32768.0);
  CHECK(back.samples[1] == -0.25);
}

TEST_CASE("wav round trip within quantization, float32 exact on the grid") {
  test::TempDir dir;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  AudioBuffer b;
  for (int i = 0; i < 4000; ++i) b.samples.push_back(u(rng));
  write_wav(dir / "p.wav", b);
  AudioBuffer p = read_wav(dir / "p.wav");
  REQUIRE(p.size() == b.size());
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(std::abs(p.samples[i] - b.samples[i]) <= 1.0 / 32768.0);

  for (double& v : b.samples) v = std::round(v / kFloat32Quantum) * kFloat32Quantum;
  write_wav(dir / "f.wav", b, WavEncoding::kFloat32);
  CHECK(read_wav(dir / "f.wav").samples == b.samples);
  CHECK_THROWS_AS(write_wav(dir / "nodir" / "x.wav", b), IoError);
}

TEST_CASE("synth_clean is deterministic, sized and bounded") {
  VoiceProfile prof;
  AudioBuffer a = synth_clean(1.0, prof, 11);
  AudioBuffer b = synth_clean(1.0, prof, 11);
  CHECK(a.size() == 16000);
  CHECK(a.samples == b.samples);
  CHECK(synth_clean(1.0, prof, 12).samples != a.samples);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    for (double v : synth_clean_samples(2048, prof, seed).samples) worst = std::max(worst, std::abs(v));
  }
  CHECK(worst <= 0.9);
  CHECK(worst > 0.5);
}

TEST_CASE("synth_noise has unit RMS and is deterministic") {
  for (NoiseKind k : {NoiseKind::kWhite, NoiseKind::kPink, NoiseKind::kBabble}) {
    AudioBuffer n = synth_noise(k, 16000, 5);
    CHECK(std::abs(std::sqrt(mean_power(n.samples)) - 1.0) < 1e-6);
    CHECK(synth_noise(k, 16000, 5).samples == n.samples);
    CHECK(synth_noise(k, 16000, 6).samples != n.samples);
  }
}

TEST_CASE("pink noise falls about 3 dB per octave") {
  // Averaged periodogram of 1024-point Hann frames, least-squares slope of
  // dB against log2(f) over 100..4000 Hz. Plain DFT, independent of the FFT code.
  const std::size_t n = 1 << 16, len = 1024;
  AudioBuffer x = synth_noise(NoiseKind::kPink, n, 21);
  std::vector<double> psd(len / 2 + 1, 0.0);
  std::vector<double> win(len);
  for (std::size_t i = 0; i < len; ++i) win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / len);
  const std::size_t kmin = 100 * len / 16000 + 1, kmax = 4000 * len / 16000;
  int frames = 0;
  for (std::size_t off = 0; off + len <= n; off += len / 2, ++frames) {
    for (std::size_t k = kmin; k <= kmax; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double ph = 2.0 * std::numbers::pi * k * i / len;
        re += win[i] * x.samples[off + i] * std::cos(ph);
        im -= win[i] * x.samples[off + i] * std::sin(ph);
      }
      psd[k] += re * re + im * im;
    }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t k = kmin; k <= kmax; ++k, ++m) {
    const double lx = std::log2(k * 16000.0 / len);
    const double ly = 10.0 * std::log10(psd[k] / frames);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  MESSAGE("pink slope " << slope << " dB/octave");
  CHECK(std::abs(slope + 3.0) <= 1.0);
}

TEST_CASE("mix_at_snr gain examples") {
  AudioBuffer c, n;
  for (int i = 0; i < 64; ++i) {
    c.samples.push_back(i % 2 ? 1.0 : -1.0);
    n.samples.push_back(i % 3 ? 1.0 : -1.0);
  }
  NoisyPair p0 = mix_at_snr(c, n, 0.0);
  CHECK(p0.noise_gain == doctest::Approx(1.0).epsilon(1e-14));
  NoisyPair p20 = mix_at_snr(c, n, 20.0);
  CHECK(p20.noise_gain == doctest::Approx(0.1).epsilon(1e-14));
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(std::abs((p20.noisy.samples[i] - p20.clean.samples[i]) - 0.1 * n.samples[i]) < 1e-12);
  }
}

TEST_CASE("mix_at_snr rejects zero power and length mismatch") {
  AudioBuffer c, n;
  c.samples.assign(16, 0.0);
  n.samples.assign(16, 1.0);
  CHECK_THROWS_AS(mix_at_snr(c, n, 5.0), DataError);
  CHECK_THROWS_AS(mix_at_snr(n, c, 5.0), DataError);
  n.samples.resize(8);
  c.samples.assign(16, 1.0);
  CHECK_THROWS_AS(mix_at_snr(c, n, 5.0), DataError);
}

TEST_CASE("recomputed SNR matches the request, 50 random cases, raw and float32 grid") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> snr_u(-5.0, 25.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double want = snr_u(rng);
    AudioBuffer c = synth_clean_samples(4096, {}, 1000 + trial);
    AudioBuffer n = synth_noise(static_cast<NoiseKind>(trial % 3), 4096, 2000 + trial);
    NoisyPair raw = mix_at_snr(c, n, want);
    CHECK(std::abs(snr_from_difference(raw) - want) < 1e-9);
    NoisyPair grid = mix_at_snr(c, n, want, MixOptions{kFloat32Quantum});
    CHECK(std::abs(snr_from_difference(grid) - want) < 1e-9);
    for (double v : grid.noisy.samples) CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }
}

TEST_CASE("scaling clean by alpha scales the gain by alpha") {
  AudioBuffer c = synth_clean_samples(4096, {}, 4);
  AudioBuffer n = synth_noise(NoiseKind::kPink, 4096, 8);
  NoisyPair p = mix_at_snr(c, n, 7.0);
  for (double alpha : {0.01, 0.3, 2.0, 17.0}) {
    AudioBuffer ca = c;
    for (double& v : ca.samples) v *= alpha;
    NoisyPair q = mix_at_snr(ca, n, 7.0);
    CHECK(q.noise_gain == doctest::Approx(alpha * p.noise_gain).epsilon(1e-12));
    CHECK(std::abs(snr_from_difference(q) - 7.0) < 1e-9);
  }
}

TEST_CASE("slicing examples") {
  AudioBuffer b;
  for (int i = 0; i < 10; ++i) b.samples.push_back(i + 1.0);
  SliceSet s = slice_utterance(b, 4, 4, SliceMode::kNonOverlapped);
  CHECK(s.slices.size() == 3);
  CHECK(s.pad_tail == 2);
  CHECK(s.slices[2] == std::vector<double>{9, 10, 0, 0});
  CHECK(join_slices(s) == b.samples);

  b.samples.clear();
  for (int i = 0; i < 16; ++i) b.samples.push_back(i + 1.0);
  SliceSet o = slice_utterance(b, 8, 4, SliceMode::kOverlapped);
  REQUIRE(o.slices.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(o.slices[k][0] == 4.0 * k + 1.0);
  CHECK(o.slices[3] == std::vector<double>{13, 14, 15, 16, 0, 0, 0, 0});
  CHECK(o.pad_tail == 4);
}

TEST_CASE("slicing contracts") {
  AudioBuffer empty;
  CHECK_THROWS_AS(slice_utterance(empty, 4, 4, SliceMode::kNonOverlapped), DataError);
  AudioBuffer b;
  b.samples.assign(10, 1.0);
  CHECK_THROWS_AS(slice_utterance(b, 4, 5, SliceMode::kOverlapped), ConfigError);
  CHECK_THROWS_AS(slice_utterance(b, 0, 1, SliceMode::kOverlapped), ConfigError);
}

TEST_CASE("non-overlapped slicing then join is the identity") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len_u(1, 3000);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 40; ++trial) {
    AudioBuffer b;
    const int len = len_u(rng);
    for (int i = 0; i < len; ++i) b.samples.push_back(g(rng));
    for (std::size_t sl : {1u, 7u, 256u, 4096u}) {
      SliceSet s = slice_utterance(b, sl, sl, SliceMode::kNonOverlapped);
      for (const auto& v : s.slices) CHECK(v.size() == sl);
      CHECK(join_slices(s) == b.samples);
    }
  }
}
