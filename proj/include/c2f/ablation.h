// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "c2f/config.h"

namespace c2f {

// D / D+M (discriminative) and G / G+M / G+M+P (adversarial): single vs
// coarse-to-fine granularity, and the perceptual term.
RunConfig variant_config(const RunConfig& base, const std::string& variant);

// Pairs that must differ in exactly one key.
std::vector<std::pair<std::string, std::string>> controlled_pairs(const std::vector<std::string>& variants);

struct CurvePoint {
  std::string variant;
  std::uint64_t seed = 0;
  int epoch = 0;
  double ssnr = 0.0;
};

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  double final_ssnr = 0.0;
  double noisy_ssnr = 0.0;
  double seconds = 0.0;
};

struct AblationResult {
  std::vector<CurvePoint> curves;
  std::vector<AblationRun> runs;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> pair_diffs;  // the key each pair differs in
};

// Trains every variant for every seed on <dataset>/train, scores
// <dataset>/test, and writes curves.csv, table.csv, runs.csv,
// config_diff.txt and per-run history files into `out`. Throws ConfigError
// if a controlled pair differs in anything but one key.
AblationResult run_ablation(const RunConfig& base, const std::filesystem::path& dataset,
                            const std::filesystem::path& out);

}  // namespace c2f
