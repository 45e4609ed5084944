// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/dataset.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "c2f/errors.h"
#include "c2f/hash.h"

namespace c2f {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string entry_line(const ManifestEntry& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["clean"] = e.clean;
  j["noisy"] = e.noisy;
  j["noise_kind"] = to_string(e.noise_kind);
  j["snr_db"] = e.snr_db;
  j["seed"] = e.seed;
  return j.dump();
}

}  // namespace

void write_manifest(const fs::path& path, const Manifest& manifest, const std::vector<std::string>& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write manifest '{}'", path.string()));
  for (const auto& line : provenance) out << "# " << line << '\n';
  for (const auto& e : manifest.entries) out << entry_line(e) << '\n';
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open manifest '{}'", path.string()));
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    try {
      const json j = json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.clean = j.at("clean").get<std::string>();
      e.noisy = j.at("noisy").get<std::string>();
      e.noise_kind = parse_noise_kind(j.at("noise_kind").get<std::string>());
      e.snr_db = j.at("snr_db").get<double>();
      e.seed = j.at("seed").get<std::uint64_t>();
      m.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw DataError(fmt::format("{}:{}: bad manifest entry ({})", path.string(), lineno, ex.what()));
    }
  }
  return m;
}

std::uint64_t manifest_hash(const Manifest& manifest) {
  // Hash the sorted lines so the id names the dataset, not the file order.
  std::vector<std::string> lines;
  lines.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) lines.push_back(entry_line(e));
  std::sort(lines.begin(), lines.end());
  std::uint64_t h = fnv1a64("");
  for (const auto& l : lines) h = fnv1a64(l + "\n", h);
  return h;
}

void DataConfig::validate() const {
  if (n_clean_train == 0) throw ConfigError("data: n_clean_train must be >= 1");
  if (noise_kinds.empty()) throw ConfigError("data: at least one noise kind required");
  if (train_snrs.empty()) throw ConfigError("data: train SNR grid is empty");
  if (n_clean_test > 0 && test_snrs.empty()) throw ConfigError("data: test SNR grid is empty");
  if (utterance_samples < 1024) throw ConfigError("data: utterance_samples must be >= 1024");
}

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestStream = 2;

std::size_t synth_split(const DataConfig& cfg, const fs::path& dir, std::uint64_t stream, std::size_t n_clean,
                        const std::vector<double>& snrs, const std::vector<std::string>& provenance) {
  const std::string split = stream == kTrainStream ? "train" : "test";
  std::error_code ec;
  fs::create_directories(dir / "clean", ec);
  fs::create_directories(dir / "noisy", ec);
  if (ec || !fs::is_directory(dir / "noisy")) {
    throw IoError(fmt::format("cannot create dataset directory '{}'", dir.string()));
  }
  MixOptions mix;
  mix.quantum = kFloat32Quantum;
  Manifest manifest;
  for (std::size_t u = 0; u < n_clean; ++u) {
    const std::uint64_t voice_seed = derive_seed(cfg.seed, {stream, u});
    const AudioBuffer clean = synth_clean_samples(cfg.utterance_samples, cfg.voice, voice_seed);
    const std::string clean_rel = fmt::format("clean/{}_u{:03}.wav", split, u);
    bool clean_written = false;
    for (std::size_t k = 0; k < cfg.noise_kinds.size(); ++k) {
      for (std::size_t s = 0; s < snrs.size(); ++s) {
        const std::uint64_t pair_seed = derive_seed(cfg.seed, {stream, u, k + 1, s + 1});
        const AudioBuffer noise = synth_noise(cfg.noise_kinds[k], cfg.utterance_samples, pair_seed);
        NoisyPair pair = mix_at_snr(clean, noise, snrs[s], mix);
        pair.noise_kind = cfg.noise_kinds[k];
        pair.seed = pair_seed;
        if (!clean_written) {
          write_wav(dir / clean_rel, pair.clean, WavEncoding::kFloat32);
          clean_written = true;
        }
        ManifestEntry e;
        e.id = fmt::format("{}_u{:03}_{}_{}dB", split, u, to_string(cfg.noise_kinds[k]), snrs[s]);
        e.clean = clean_rel;
        e.noisy = fmt::format("noisy/{}.wav", e.id);
        e.noise_kind = pair.noise_kind;
        e.snr_db = snrs[s];
        e.seed = pair_seed;
        write_wav(dir / e.noisy, pair.noisy, WavEncoding::kFloat32);
        manifest.entries.push_back(std::move(e));
      }
    }
  }
  write_manifest(dir / "manifest.jsonl", manifest, provenance);
  return manifest.entries.size();
}

}  // namespace

SynthSummary synth_dataset(const DataConfig& cfg, const fs::path& out, const std::vector<std::string>& provenance) {
  cfg.validate();
  SynthSummary s;
  s.train_manifest = out / "train" / "manifest.jsonl";
  s.test_manifest = out / "test" / "manifest.jsonl";
  s.train_pairs = synth_split(cfg, out / "train", kTrainStream, cfg.n_clean_train, cfg.train_snrs, provenance);
  if (cfg.n_clean_test > 0) {
    s.test_pairs = synth_split(cfg, out / "test", kTestStream, cfg.n_clean_test, cfg.test_snrs, provenance);
  }
  return s;
}

std::vector<LoadedPair> load_pairs(const Manifest& manifest) {
  std::vector<LoadedPair> pairs;
  pairs.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    LoadedPair p;
    p.entry = e;
    p.clean = read_wav(manifest.root / e.clean);
    p.noisy = read_wav(manifest.root / e.noisy);
    if (p.clean.size() != p.noisy.size()) {
      throw DataError(fmt::format("pair '{}': clean and noisy lengths differ ({} vs {})", e.id, p.clean.size(),
                                  p.noisy.size()));
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

TrainingSet make_training_set(const std::vector<LoadedPair>& pairs, std::size_t slice_len, std::size_t stride) {
  if (pairs.empty()) throw DataError("training set: manifest has no pairs");
  TrainingSet set;
  set.slice_len = slice_len;
  for (const auto& p : pairs) {
    SliceSet c = slice_utterance(p.clean, slice_len, stride, SliceMode::kOverlapped);
    SliceSet n = slice_utterance(p.noisy, slice_len, stride, SliceMode::kOverlapped);
    for (auto& s : c.slices) set.clean.push_back(std::move(s));
    for (auto& s : n.slices) set.noisy.push_back(std::move(s));
  }
  return set;
}

}  // namespace c2f
