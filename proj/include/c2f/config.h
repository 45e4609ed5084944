// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "c2f/dataset.h"
#include "c2f/metrics.h"
#include "c2f/trainer.h"

namespace c2f {

inline constexpr const char* kCodeVersion = "c2f-enhance 0.1.0";

struct AblationConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  std::vector<std::string> variants{"D", "D+M"};
  int eval_every = 1;  // test-set SSNR every N epochs (0: final only)
};

struct RunConfig {
  DataConfig data;
  TrainConfig train;
  SsnrConfig ssnr;
  unsigned eval_threads = 1;
  AblationConfig ablate;

  void validate() const;
};

// Every setting as ("section.key", value) in schema order.
std::vector<std::pair<std::string, std::string>> flatten(const RunConfig& cfg);

// Throws ConfigError for unknown keys and unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
// "section.key=value"
void apply_override(RunConfig& cfg, const std::string& assignment);

// INI text with [section] headers; parse_config starts from defaults.
std::string to_ini(const RunConfig& cfg);
RunConfig parse_config(const std::string& ini_text);
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

std::uint64_t config_hash(const RunConfig& cfg);

// Header lines for output files: code version, config hash, seed.
std::vector<std::string> provenance(const RunConfig& cfg, std::uint64_t seed);

// Keys whose values differ, in schema order.
std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b);

}  // namespace c2f
