// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "c2f/signal_io.h"

namespace c2f {

// One noisy/clean pair. Paths are relative to the manifest's directory.
struct ManifestEntry {
  std::string id;
  std::string clean;
  std::string noisy;
  NoiseKind noise_kind = NoiseKind::kWhite;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;  // directory the relative paths resolve against
};

// JSON lines, one object per pair; lines starting with '#' carry provenance.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest,
                    const std::vector<std::string>& provenance = {});
Manifest read_manifest(const std::filesystem::path& path);
std::uint64_t manifest_hash(const Manifest& manifest);

struct DataConfig {
  std::size_t n_clean_train = 10;
  std::size_t n_clean_test = 4;
  std::vector<NoiseKind> noise_kinds{NoiseKind::kWhite, NoiseKind::kPink, NoiseKind::kBabble};
  std::vector<double> train_snrs{15.0, 10.0, 5.0, 0.0};
  std::vector<double> test_snrs{17.5, 12.5, 7.5, 2.5};
  std::size_t utterance_samples = 8192;
  std::uint64_t seed = 7;
  VoiceProfile voice;

  void validate() const;
};

struct SynthSummary {
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::size_t train_pairs = 0;
  std::size_t test_pairs = 0;
};

// Writes <out>/{train,test}/{clean,noisy}/*.wav (float32) and
// <out>/{train,test}/manifest.jsonl. Train and test draw from disjoint seed
// streams.
SynthSummary synth_dataset(const DataConfig& cfg, const std::filesystem::path& out,
                           const std::vector<std::string>& provenance = {});

struct LoadedPair {
  ManifestEntry entry;
  AudioBuffer clean;
  AudioBuffer noisy;
};

// Throws IoError/DataError on the first unreadable pair.
std::vector<LoadedPair> load_pairs(const Manifest& manifest);

// Fixed-length training slices of every pair (overlapped slicing).
struct TrainingSet {
  std::vector<std::vector<double>> clean;
  std::vector<std::vector<double>> noisy;
  std::size_t slice_len = 0;

  std::size_t size() const { return clean.size(); }
};

TrainingSet make_training_set(const std::vector<LoadedPair>& pairs, std::size_t slice_len, std::size_t stride);

}  // namespace c2f
