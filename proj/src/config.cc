// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "c2f/errors.h"
#include "c2f/hash.h"

namespace c2f {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(fmt::format("config: {} = '{}' is not {}", key, value, expected));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const std::string s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad_value(key, v, "a number");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const std::string s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad_value(key, v, "an integer");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < 0) bad_value(key, v, "a non-negative integer");
  return static_cast<std::size_t>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const std::string s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad_value(key, v, "an unsigned integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  bad_value(key, v, "a boolean");
}

std::string str(double v) { return fmt::format("{}", v); }
std::string str(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string join(const std::vector<T>& v) {
  return fmt::format("{}", fmt::join(v, ","));
}

using Pair2 = std::pair<std::size_t, std::size_t>;

Pair2 to_pair(const std::string& key, const std::string& v) {
  const auto parts = split(v, 'x');
  if (parts.size() != 2) bad_value(key, v, "an HxW pair");
  return {to_size(key, parts[0]), to_size(key, parts[1])};
}

std::vector<Pair2> to_pairs(const std::string& key, const std::string& v, std::size_t n) {
  std::vector<Pair2> out;
  for (const auto& p : split(v, ',')) out.push_back(to_pair(key, p));
  if (out.size() == 1 && n > 1) out.resize(n, out[0]);
  if (out.size() != n) {
    throw ConfigError(fmt::format("config: {} lists {} entries for {} blocks", key, out.size(), n));
  }
  return out;
}

std::string blocks_str(const std::vector<BlockSpec>& b, Pair2 (*get)(const BlockSpec&)) {
  std::vector<std::string> parts;
  for (const auto& x : b) {
    const Pair2 p = get(x);
    parts.push_back(fmt::format("{}x{}", p.first, p.second));
  }
  return join(parts);
}

Pair2 kernel_of(const BlockSpec& b) { return {b.kernel_h, b.kernel_w}; }
Pair2 stride_of(const BlockSpec& b) { return {b.stride_h, b.stride_w}; }
Pair2 pad_of(const BlockSpec& b) { return {b.pad_h, b.pad_w}; }

void set_channels(std::vector<BlockSpec>& blocks, const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.empty()) throw ConfigError(fmt::format("config: {} needs at least one block", key));
  const BlockSpec proto = blocks.empty() ? BlockSpec{} : blocks.back();
  blocks.resize(parts.size(), proto);
  for (std::size_t i = 0; i < parts.size(); ++i) blocks[i].out_channels = to_size(key, parts[i]);
}

template <typename F>
void set_geometry(std::vector<BlockSpec>& blocks, const std::string& key, const std::string& v, F assign) {
  const auto pairs = to_pairs(key, v, blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) assign(blocks[i], pairs[i]);
}

struct Setting {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& p : split(v, ',')) out.push_back(to_double(key, p));
  return out;
}

std::vector<int> to_ints(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& p : split(v, ',')) out.push_back(static_cast<int>(to_int(key, p)));
  return out;
}

void rebuild_stft(RunConfig& c, std::size_t win, std::size_t hop, WindowKind kind) {
  c.train.stft = StftConfig(win, hop, kind);
}

#define C2F_SETTING(KEY, GET, SET)                                                              \
  Setting {                                                                                     \
    KEY, [](const RunConfig& c) -> std::string { return GET; },                                 \
        [](RunConfig & c, const std::string& k, const std::string& v) { (void)k; SET; }        \
  }

const std::vector<Setting>& schema() {
  static const std::vector<Setting> s = {
      // data
      C2F_SETTING("data.n_clean_train", std::to_string(c.data.n_clean_train), c.data.n_clean_train = to_size(k, v)),
      C2F_SETTING("data.n_clean_test", std::to_string(c.data.n_clean_test), c.data.n_clean_test = to_size(k, v)),
      C2F_SETTING("data.noise_kinds",
                  [&] {
                    std::vector<std::string> n;
                    for (auto x : c.data.noise_kinds) n.push_back(to_string(x));
                    return join(n);
                  }(),
                  {
                    c.data.noise_kinds.clear();
                    for (const auto& p : split(v, ',')) c.data.noise_kinds.push_back(parse_noise_kind(p));
                  }),
      C2F_SETTING("data.train_snrs", join(c.data.train_snrs), c.data.train_snrs = to_doubles(k, v)),
      C2F_SETTING("data.test_snrs", join(c.data.test_snrs), c.data.test_snrs = to_doubles(k, v)),
      C2F_SETTING("data.utterance_samples", std::to_string(c.data.utterance_samples),
                  c.data.utterance_samples = to_size(k, v)),
      C2F_SETTING("data.seed", std::to_string(c.data.seed), c.data.seed = to_u64(k, v)),
      // stft
      C2F_SETTING("stft.window_len", std::to_string(c.train.stft.window_len()),
                  rebuild_stft(c, to_size(k, v), c.train.stft.hop(), c.train.stft.window_kind())),
      C2F_SETTING("stft.hop", std::to_string(c.train.stft.hop()),
                  rebuild_stft(c, c.train.stft.window_len(), to_size(k, v), c.train.stft.window_kind())),
      C2F_SETTING("stft.window", to_string(c.train.stft.window_kind()),
                  rebuild_stft(c, c.train.stft.window_len(), c.train.stft.hop(), parse_window_kind(trim(v)))),
      // generator
      C2F_SETTING("generator.channels",
                  [&] {
                    std::vector<std::size_t> ch;
                    for (const auto& b : c.train.generator.encoder) ch.push_back(b.out_channels);
                    return join(ch);
                  }(),
                  set_channels(c.train.generator.encoder, k, v)),
      C2F_SETTING("generator.kernels", blocks_str(c.train.generator.encoder, kernel_of),
                  set_geometry(c.train.generator.encoder, k, v, [](BlockSpec& b, Pair2 p) {
                    b.kernel_h = p.first;
                    b.kernel_w = p.second;
                  })),
      C2F_SETTING("generator.strides", blocks_str(c.train.generator.encoder, stride_of),
                  set_geometry(c.train.generator.encoder, k, v, [](BlockSpec& b, Pair2 p) {
                    b.stride_h = p.first;
                    b.stride_w = p.second;
                  })),
      C2F_SETTING("generator.pads", blocks_str(c.train.generator.encoder, pad_of),
                  set_geometry(c.train.generator.encoder, k, v, [](BlockSpec& b, Pair2 p) {
                    b.pad_h = p.first;
                    b.pad_w = p.second;
                  })),
      C2F_SETTING("generator.skip_connections", str(c.train.generator.skip_connections),
                  c.train.generator.skip_connections = to_bool(k, v)),
      C2F_SETTING("generator.latent_noise", str(c.train.generator.latent.enabled),
                  c.train.generator.latent.enabled = to_bool(k, v)),
      C2F_SETTING("generator.latent_mean", str(c.train.generator.latent.mean),
                  c.train.generator.latent.mean = to_double(k, v)),
      C2F_SETTING("generator.latent_variance", str(c.train.generator.latent.variance),
                  c.train.generator.latent.variance = to_double(k, v)),
      C2F_SETTING("generator.leaky_slope", str(c.train.generator.leaky_slope),
                  c.train.generator.leaky_slope = to_double(k, v)),
      C2F_SETTING("generator.input_power", str(c.train.generator.input_power),
                  c.train.generator.input_power = to_double(k, v)),
      // discriminator
      C2F_SETTING("discriminator.channels",
                  [&] {
                    std::vector<std::size_t> ch;
                    for (const auto& b : c.train.discriminator.backbone) ch.push_back(b.out_channels);
                    return join(ch);
                  }(),
                  set_channels(c.train.discriminator.backbone, k, v)),
      C2F_SETTING("discriminator.kernels", blocks_str(c.train.discriminator.backbone, kernel_of),
                  set_geometry(c.train.discriminator.backbone, k, v, [](BlockSpec& b, Pair2 p) {
                    b.kernel_h = p.first;
                    b.kernel_w = p.second;
                  })),
      C2F_SETTING("discriminator.strides", blocks_str(c.train.discriminator.backbone, stride_of),
                  set_geometry(c.train.discriminator.backbone, k, v, [](BlockSpec& b, Pair2 p) {
                    b.stride_h = p.first;
                    b.stride_w = p.second;
                  })),
      C2F_SETTING("discriminator.pads", blocks_str(c.train.discriminator.backbone, pad_of),
                  set_geometry(c.train.discriminator.backbone, k, v, [](BlockSpec& b, Pair2 p) {
                    b.pad_h = p.first;
                    b.pad_w = p.second;
                  })),
      C2F_SETTING("discriminator.head_channels",
                  [&] {
                    std::vector<std::size_t> ch;
                    for (const auto& h : c.train.discriminator.head) ch.push_back(h.out_channels);
                    return join(ch);
                  }(),
                  {
                    const auto parts = split(v, ',');
                    c.train.discriminator.head.resize(parts.size());
                    for (std::size_t i = 0; i < parts.size(); ++i) {
                      c.train.discriminator.head[i].out_channels = to_size(k, parts[i]);
                    }
                  }),
      C2F_SETTING("discriminator.head_kernels",
                  [&] {
                    std::vector<std::string> p;
                    for (const auto& h : c.train.discriminator.head) p.push_back(fmt::format("{}x{}", h.kernel_h, h.kernel_w));
                    return join(p);
                  }(),
                  {
                    const auto pairs = to_pairs(k, v, c.train.discriminator.head.size());
                    for (std::size_t i = 0; i < pairs.size(); ++i) {
                      c.train.discriminator.head[i].kernel_h = pairs[i].first;
                      c.train.discriminator.head[i].kernel_w = pairs[i].second;
                    }
                  }),
      C2F_SETTING("discriminator.head_pads",
                  [&] {
                    std::vector<std::string> p;
                    for (const auto& h : c.train.discriminator.head) p.push_back(fmt::format("{}x{}", h.pad_h, h.pad_w));
                    return join(p);
                  }(),
                  {
                    const auto pairs = to_pairs(k, v, c.train.discriminator.head.size());
                    for (std::size_t i = 0; i < pairs.size(); ++i) {
                      c.train.discriminator.head[i].pad_h = pairs[i].first;
                      c.train.discriminator.head[i].pad_w = pairs[i].second;
                    }
                  }),
      C2F_SETTING("discriminator.tap_layers", join(c.train.discriminator.tap_layers),
                  c.train.discriminator.tap_layers = to_ints(k, v)),
      C2F_SETTING("discriminator.leaky_slope", str(c.train.discriminator.leaky_slope),
                  c.train.discriminator.leaky_slope = to_double(k, v)),
      C2F_SETTING("discriminator.input_power", str(c.train.discriminator.input_power),
                  c.train.discriminator.input_power = to_double(k, v)),
      // train
      C2F_SETTING("train.mode", to_string(c.train.mode), c.train.mode = parse_train_mode(trim(v))),
      C2F_SETTING("train.epochs", std::to_string(c.train.epochs), c.train.epochs = static_cast<int>(to_int(k, v))),
      C2F_SETTING("train.batch_size", std::to_string(c.train.batch_size), c.train.batch_size = to_size(k, v)),
      C2F_SETTING("train.lr", str(c.train.adam.lr), c.train.adam.lr = to_double(k, v)),
      C2F_SETTING("train.beta1", str(c.train.adam.beta1), c.train.adam.beta1 = to_double(k, v)),
      C2F_SETTING("train.beta2", str(c.train.adam.beta2), c.train.adam.beta2 = to_double(k, v)),
      C2F_SETTING("train.adam_eps", str(c.train.adam.eps), c.train.adam.eps = to_double(k, v)),
      C2F_SETTING("train.weight_decay", str(c.train.adam.weight_decay), c.train.adam.weight_decay = to_double(k, v)),
      C2F_SETTING("train.lr_schedule",
                  [&] {
                    std::vector<std::string> p;
                    for (const auto& [e, m] : c.train.lr_schedule) p.push_back(fmt::format("{}:{}", e, m));
                    return join(p);
                  }(),
                  {
                    c.train.lr_schedule.clear();
                    for (const auto& item : split(v, ',')) {
                      const auto kv = split(item, ':');
                      if (kv.size() != 2) bad_value(k, v, "a list of epoch:multiplier entries");
                      c.train.lr_schedule.emplace_back(static_cast<int>(to_int(k, kv[0])), to_double(k, kv[1]));
                    }
                  }),
      C2F_SETTING("train.disc_lr", str(c.train.disc_lr), c.train.disc_lr = to_double(k, v)),
      C2F_SETTING("train.adversarial_form", to_string(c.train.adversarial),
                  c.train.adversarial = parse_adversarial_form(trim(v))),
      C2F_SETTING("train.seed", std::to_string(c.train.seed), c.train.seed = to_u64(k, v)),
      C2F_SETTING("train.slice_len", std::to_string(c.train.slice_len), c.train.slice_len = to_size(k, v)),
      C2F_SETTING("train.slice_stride", std::to_string(c.train.slice_stride), c.train.slice_stride = to_size(k, v)),
      C2F_SETTING("train.bn_momentum", str(c.train.bn_momentum), c.train.bn_momentum = to_double(k, v)),
      // granularity
      C2F_SETTING("granularity.mode", to_string(c.train.granularity.mode),
                  c.train.granularity.mode = parse_granularity_mode(trim(v))),
      C2F_SETTING("granularity.g_start", std::to_string(c.train.granularity.g_start),
                  c.train.granularity.g_start = to_size(k, v)),
      C2F_SETTING("granularity.g_min", std::to_string(c.train.granularity.g_min),
                  c.train.granularity.g_min = to_size(k, v)),
      C2F_SETTING("granularity.period", std::to_string(c.train.granularity.period),
                  c.train.granularity.period = static_cast<int>(to_int(k, v))),
      C2F_SETTING("granularity.plateau_window", std::to_string(c.train.granularity.plateau_window),
                  c.train.granularity.plateau_window = static_cast<int>(to_int(k, v))),
      C2F_SETTING("granularity.plateau_threshold", str(c.train.granularity.plateau_threshold),
                  c.train.granularity.plateau_threshold = to_double(k, v)),
      C2F_SETTING("granularity.plateau_max_epochs", std::to_string(c.train.granularity.plateau_max_epochs),
                  c.train.granularity.plateau_max_epochs = static_cast<int>(to_int(k, v))),
      // loss
      C2F_SETTING("loss.regularization_coeff", str(c.train.weights.regularization_coeff),
                  c.train.weights.regularization_coeff = to_double(k, v)),
      C2F_SETTING("loss.adversarial_coeff", str(c.train.weights.adversarial_coeff),
                  c.train.weights.adversarial_coeff = to_double(k, v)),
      C2F_SETTING("loss.perceptual_coeff", str(c.train.weights.perceptual_coeff),
                  c.train.weights.perceptual_coeff = to_double(k, v)),
      // dpl
      C2F_SETTING("dpl.enabled", str(c.train.dpl.enabled), c.train.dpl.enabled = to_bool(k, v)),
      C2F_SETTING("dpl.phase_length", std::to_string(c.train.dpl.phase_length),
                  c.train.dpl.phase_length = static_cast<int>(to_int(k, v))),
      C2F_SETTING("dpl.taps", join(c.train.dpl.taps), c.train.dpl.taps = to_ints(k, v)),
      C2F_SETTING("dpl.composition", to_string(c.train.dpl.composition),
                  c.train.dpl.composition = parse_dpl_composition(trim(v))),
      // eval
      C2F_SETTING("eval.ssnr_frame_len", std::to_string(c.ssnr.frame_len), c.ssnr.frame_len = to_size(k, v)),
      C2F_SETTING("eval.ssnr_frame_hop", std::to_string(c.ssnr.frame_hop), c.ssnr.frame_hop = to_size(k, v)),
      C2F_SETTING("eval.ssnr_clamp", str(c.ssnr.clamp), c.ssnr.clamp = to_bool(k, v)),
      C2F_SETTING("eval.ssnr_clamp_lo", str(c.ssnr.clamp_lo), c.ssnr.clamp_lo = to_double(k, v)),
      C2F_SETTING("eval.ssnr_clamp_hi", str(c.ssnr.clamp_hi), c.ssnr.clamp_hi = to_double(k, v)),
      C2F_SETTING("eval.threads", std::to_string(c.eval_threads),
                  c.eval_threads = static_cast<unsigned>(to_size(k, v))),
      // ablate
      C2F_SETTING("ablate.seeds", join(c.ablate.seeds),
                  {
                    c.ablate.seeds.clear();
                    for (const auto& p : split(v, ',')) c.ablate.seeds.push_back(to_u64(k, p));
                  }),
      C2F_SETTING("ablate.variants", join(c.ablate.variants), c.ablate.variants = split(v, ',')),
      C2F_SETTING("ablate.eval_every", std::to_string(c.ablate.eval_every),
                  c.ablate.eval_every = static_cast<int>(to_int(k, v))),
  };
  return s;
}

#undef C2F_SETTING

const Setting& find_setting(const std::string& key) {
  for (const auto& s : schema()) {
    if (s.key == key) return s;
  }
  throw ConfigError(fmt::format("config: unknown key '{}'", key));
}

bool is_stft_key(const std::string& key) { return key.rfind("stft.", 0) == 0; }

// STFT geometry is validated as a whole, so its keys are applied together.
void apply_all(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::size_t win = cfg.train.stft.window_len(), hop = cfg.train.stft.hop();
  WindowKind kind = cfg.train.stft.window_kind();
  bool stft_touched = false;
  for (const auto& [k, v] : kv) {
    if (is_stft_key(k)) {
      find_setting(k);
      if (k == "stft.window_len") win = to_size(k, v);
      if (k == "stft.hop") hop = to_size(k, v);
      if (k == "stft.window") kind = parse_window_kind(trim(v));
      stft_touched = true;
    } else {
      find_setting(k).set(cfg, k, v);
    }
  }
  if (stft_touched) rebuild_stft(cfg, win, hop, kind);
}

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v{"D", "D+M", "G", "G+M", "G+M+P"};
  return v;
}

}  // namespace

void RunConfig::validate() const {
  data.validate();
  train.validate();
  ssnr.validate();
  if (eval_threads == 0) throw ConfigError("eval.threads must be >= 1");
  if (ablate.seeds.empty()) throw ConfigError("ablate.seeds must list at least one seed");
  if (ablate.eval_every < 0) throw ConfigError("ablate.eval_every must be >= 0");
  for (const auto& v : ablate.variants) {
    if (std::find(ablation_variants().begin(), ablation_variants().end(), v) == ablation_variants().end()) {
      throw ConfigError(fmt::format("ablate: unknown variant '{}'", v));
    }
  }
}

std::vector<std::pair<std::string, std::string>> flatten(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : schema()) out.emplace_back(s.key, s.get(cfg));
  return out;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  apply_all(cfg, {{key, value}});
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(fmt::format("override '{}' is not of the form section.key=value", assignment));
  }
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string to_ini(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& [key, value] : flatten(cfg)) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += '\n';
      out += fmt::format("[{}]\n", sec);
      section = sec;
    }
    out += fmt::format("{} = {}\n", key.substr(dot + 1), value);
  }
  return out;
}

RunConfig parse_config(const std::string& ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(fmt::format("config: key '{}' outside any [section]", section));
    }
    for (const auto& [key, node] : body) kv.emplace_back(section + "." + key, node.data());
  }
  RunConfig cfg;
  apply_all(cfg, kv);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = parse_config(ss.str());
  }
  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("override '{}' is not of the form section.key=value", o));
    kv.emplace_back(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  apply_all(cfg, kv);
  cfg.validate();
  return cfg;
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(to_ini(cfg)); }

std::vector<std::string> provenance(const RunConfig& cfg, std::uint64_t seed) {
  return {fmt::format("version {}", kCodeVersion), fmt::format("config {}", hex64(config_hash(cfg))),
          fmt::format("seed {}", seed)};
}

std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b) {
  const auto fa = flatten(a), fb = flatten(b);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    if (fa[i].second != fb[i].second) out.push_back(fa[i].first);
  }
  return out;
}

}  // namespace c2f
