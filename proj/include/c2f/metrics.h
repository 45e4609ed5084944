// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "c2f/dataset.h"
#include "c2f/signal_io.h"
#include "c2f/spectral.h"

namespace c2f {

struct SsnrConfig {
  std::size_t frame_len = 256;
  std::size_t frame_hop = 128;
  double clamp_lo = -10.0;
  double clamp_hi = 35.0;
  bool clamp = true;  // false: raw per-frame values, zero-error frames are +inf

  void validate() const;
};

inline constexpr double kSnrSentinelDb = 99.0;
inline constexpr double kLsdEps = 1e-10;

// Mean over full frames of the per-frame clean-to-error ratio in dB. Frames
// with zero clean energy are skipped.
double ssnr(std::span<const double> clean, std::span<const double> enhanced, const SsnrConfig& cfg = {});
// Global ratio in dB, capped at the 99 dB sentinel.
double snr(std::span<const double> clean, std::span<const double> enhanced);
// Frame mean of the RMS log-magnitude difference (dB) over all bins.
double lsd(std::span<const double> clean, std::span<const double> enhanced, const StftConfig& cfg = {});

struct MetricsRow {
  std::string id;
  double ssnr = 0.0;
  double snr = 0.0;
  double lsd = 0.0;
  double noisy_ssnr = 0.0;
  double noisy_snr = 0.0;
  double noisy_lsd = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;  // sorted by id
  MetricsRow mean;               // id "MEAN"
  std::string checkpoint_id;
  std::uint64_t manifest_hash = 0;
  std::size_t skipped = 0;
};

struct EvalOptions {
  SsnrConfig ssnr;
  StftConfig stft;
  unsigned threads = 1;
};

using Enhancer = std::function<AudioBuffer(const AudioBuffer& noisy)>;

// Throws DataError for an empty manifest or when no pair could be evaluated.
MetricsReport evaluate_set(const Enhancer& enhancer, const Manifest& manifest, const EvalOptions& options = {});

// Comma-separated with a header row, one row per pair and a final "MEAN" row.
// Columns for externally computed PESQ/CSIG/CBAK/COVL are left blank.
void write_report(std::ostream& out, const MetricsReport& report, const std::vector<std::string>& provenance = {});
void write_report(const std::filesystem::path& path, const MetricsReport& report,
                  const std::vector<std::string>& provenance = {});

}  // namespace c2f
