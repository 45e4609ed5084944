// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>

#include "c2f/ablation.h"
#include "c2f/config.h"
#include "c2f/errors.h"
#include "test_util.h"
#include "tiny_config.h"

using namespace c2f;
namespace fs = std::filesystem;

namespace {

std::string value_of(const RunConfig& c, const std::string& key) {
  for (const auto& [k, v] : flatten(c)) {
    if (k == key) return v;
  }
  FAIL("no key " << key);
  return {};
}

}  // namespace

TEST_CASE("defaults round trip through INI text") {
  RunConfig d;
  CHECK_NOTHROW(d.validate());
  const std::string ini = to_ini(d);
  CHECK(ini.find("[train]\n") != std::string::npos);
  RunConfig back = parse_config(ini);
  CHECK(flatten(back) == flatten(d));
  CHECK(config_hash(back) == config_hash(d));
  CHECK(config_diff(back, d).empty());
}

TEST_CASE("desk defaults as configured") {
  RunConfig d;
  CHECK(value_of(d, "train.lr") == "0.0004");
  CHECK(value_of(d, "train.batch_size") == "8");
  CHECK(value_of(d, "train.epochs") == "40");
  CHECK(value_of(d, "granularity.g_start") == "4096");
  CHECK(value_of(d, "granularity.g_min") == "32");
  CHECK(value_of(d, "stft.window_len") == "1024");
  CHECK(value_of(d, "stft.hop") == "256");
  CHECK(value_of(d, "generator.channels") == "16,32,64,128");
  CHECK(value_of(d, "discriminator.tap_layers") == "4,3,2,1");
}

TEST_CASE("a modified config survives the round trip key by key") {
  RunConfig c;
  apply_override(c, "train.lr=0.00125");
  apply_override(c, "train.lr_schedule=10:0.5,20:0.25");
  apply_override(c, "data.noise_kinds=pink,babble");
  apply_override(c, "granularity.mode = plateau");
  // One key at a time, so the hop shrinks before the window does.
  apply_override(c, "stft.hop=128");
  apply_override(c, "stft.window_len=512");
  apply_override(c, "generator.skip_connections=false");
  apply_override(c, "ablate.seeds=5,6");
  RunConfig back = parse_config(to_ini(c));
  CHECK(flatten(back) == flatten(c));
  CHECK(back.train.adam.lr == 0.00125);
  CHECK(back.train.lr_schedule == LrSchedule{{10, 0.5}, {20, 0.25}});
  CHECK(back.train.stft.window_len() == 512);
  CHECK(back.data.noise_kinds == std::vector<NoiseKind>{NoiseKind::kPink, NoiseKind::kBabble});
  CHECK_FALSE(back.train.generator.skip_connections);
  const auto diff = config_diff(RunConfig{}, c);
  CHECK(diff.size() == 8);
  CHECK(config_hash(c) != config_hash(RunConfig{}));
}

TEST_CASE("bad settings are configuration errors") {
  RunConfig c;
  CHECK_THROWS_AS(apply_override(c, "train.learning_rate=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "train.epochs=many"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "train.epochs"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "stft.hop=300"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "train.mode=wgan"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("orphan = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train\n"), ConfigError);
  CHECK_THROWS_AS(load_config("", {"ablate.variants=D,X"}), ConfigError);
  CHECK_THROWS_AS(load_config("", {"train.epochs=0"}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/c2f.ini"), IoError);
}

TEST_CASE("load_config applies overrides after the file") {
  test::TempDir dir;
  std::ofstream(dir / "c.ini") << "[train]\nepochs = 12\nseed = 3\n";
  RunConfig c = load_config(dir / "c.ini", {"train.seed=9"});
  CHECK(c.train.epochs == 12);
  CHECK(c.train.seed == 9);
  const auto prov = provenance(c, 9);
  REQUIRE(prov.size() == 3);
  CHECK(prov[0] == std::string("version ") + kCodeVersion);
  CHECK(prov[2] == "seed 9");
}

TEST_CASE("ablation variants differ from their partner in one key") {
  RunConfig base;
  base.train.granularity.mode = GranularityMode::kEpochStep;
  auto d = variant_config(base, "D"), dm = variant_config(base, "D+M");
  CHECK(config_diff(d, dm) == std::vector<std::string>{"granularity.mode"});
  CHECK(d.train.mode == TrainMode::kDiscriminative);
  CHECK(d.train.granularity.mode == GranularityMode::kConstant);
  auto gm = variant_config(base, "G+M"), gmp = variant_config(base, "G+M+P");
  CHECK(config_diff(gm, gmp) == std::vector<std::string>{"dpl.enabled"});
  CHECK(config_diff(variant_config(base, "G"), gm) == std::vector<std::string>{"granularity.mode"});
  CHECK(gmp.train.mode == TrainMode::kGan);
  CHECK_THROWS_AS(variant_config(base, "M"), ConfigError);
  const auto pairs = controlled_pairs({"D", "D+M", "G", "G+M", "G+M+P"});
  CHECK(pairs.size() == 3);
  CHECK(controlled_pairs({"D"}).empty());
}

TEST_CASE("a small ablation writes curves, tables and per-run histories") {
  test::TempDir dir;
  RunConfig base;
  base.data.n_clean_train = 1;
  base.data.n_clean_test = 1;
  base.data.noise_kinds = {NoiseKind::kWhite};
  base.data.train_snrs = {5.0};
  base.data.test_snrs = {7.5};
  base.data.utterance_samples = 2048;
  base.train = test::tiny_train_config();
  base.train.epochs = 3;
  base.ablate.seeds = {1, 2};
  synth_dataset(base.data, dir / "data");
  AblationResult r = run_ablation(base, dir / "data", dir / "out");
  CHECK(r.runs.size() == 4);
  CHECK(r.curves.size() == 12);
  REQUIRE(r.pair_diffs.size() == 1);
  CHECK(r.pair_diffs[0] == "granularity.mode");
  for (const char* f : {"curves.csv", "table.csv", "runs.csv", "config_diff.txt", "history_D_seed1.csv",
                        "history_D_M_seed2.csv"}) {
    CHECK(fs::exists(dir / "out" / f));
  }
  const std::string curves = test::read_file(dir / "out" / "curves.csv");
  CHECK(curves.find("variant,seed,epoch,ssnr_db\n") != std::string::npos);
  CHECK(curves.find("\nD+M,2,2,") != std::string::npos);
  const std::string table = test::read_file(dir / "out" / "table.csv");
  CHECK(table.find("method,pesq,csig,cbak,covl,ssnr_db\nNoisy,,,,,") != std::string::npos);
  for (const auto& run : r.runs) CHECK(std::isfinite(run.final_ssnr));

  // Same inputs, same outputs.
  run_ablation(base, dir / "data", dir / "again");
  CHECK(test::read_file(dir / "out" / "runs.csv") == test::read_file(dir / "again" / "runs.csv"));
}
