// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/networks.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "c2f/errors.h"
#include "c2f/hash.h"

namespace c2f {

using ag::Array;
using ag::Shape;
using ag::Tape;
using ag::Var;

std::size_t GeneratorConfig::frame_stride() const {
  std::size_t s = 1;
  for (const auto& b : encoder) s *= b.stride_h;
  return s;
}

std::size_t GeneratorConfig::bin_stride() const {
  std::size_t s = 1;
  for (const auto& b : encoder) s *= b.stride_w;
  return s;
}

namespace {

void validate_blocks(const std::vector<BlockSpec>& blocks, const char* what) {
  if (blocks.empty()) throw ConfigError(fmt::format("{}: needs at least one block", what));
  for (const auto& b : blocks) {
    if (b.out_channels == 0 || b.kernel_h == 0 || b.kernel_w == 0) {
      throw ConfigError(fmt::format("{}: zero-sized block", what));
    }
    if (b.stride_h < 1 || b.stride_h > 2 || b.stride_w < 1 || b.stride_w > 2) {
      throw ConfigError(fmt::format("{}: strides must be 1 or 2 per axis", what));
    }
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  validate_blocks(encoder, "generator");
  // The mirrored transposed conv restores the input size only when k - 2p == s.
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const auto& b = encoder[i];
    if (b.kernel_h != 2 * b.pad_h + b.stride_h || b.kernel_w != 2 * b.pad_w + b.stride_w) {
      throw ConfigError(fmt::format("generator: block {} needs kernel = 2 * pad + stride on both axes", i));
    }
  }
  if (latent.variance < 0.0) throw ConfigError("generator: latent variance must be >= 0");
  if (!(input_power > 0.0)) throw ConfigError("generator: input_power must be positive");
}

GeneratorConfig GeneratorConfig::desk_default() {
  GeneratorConfig cfg;
  for (std::size_t c : {16, 32, 64, 128}) cfg.encoder.push_back(BlockSpec{c, 3, 4, 1, 2, 1, 1});
  return cfg;
}

void DiscriminatorConfig::validate() const {
  validate_blocks(backbone, "discriminator");
  if (head.size() != 2) throw ConfigError("discriminator: expects exactly two head convolutions");
  int previous = static_cast<int>(backbone.size()) + 1;
  for (int tap : tap_layers) {
    if (tap < 1 || tap > static_cast<int>(backbone.size())) {
      throw ConfigError(fmt::format("discriminator: tap layer {} outside backbone 1..{}", tap, backbone.size()));
    }
    if (tap >= previous) throw ConfigError("discriminator: tap layers must be strictly decreasing in depth");
    previous = tap;
  }
}

DiscriminatorConfig DiscriminatorConfig::desk_default(const GeneratorConfig& generator) {
  DiscriminatorConfig cfg;
  cfg.backbone = generator.encoder;
  cfg.head = {HeadConvSpec{32, 3, 5, 1, 2}, HeadConvSpec{32, 1, 1, 0, 0}};
  cfg.leaky_slope = generator.leaky_slope;
  cfg.input_power = generator.input_power;
  // Taps at 9/10, 7/10, 5/10, 3/10 of the backbone depth.
  const double depth = static_cast<double>(cfg.backbone.size());
  for (int k : {9, 7, 5, 3}) {
    int layer = std::max(1, static_cast<int>(std::lround(depth * k / 10.0)));
    if (cfg.tap_layers.empty() || layer < cfg.tap_layers.back()) cfg.tap_layers.push_back(layer);
  }
  return cfg;
}

std::size_t ParamSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params) n += v.size();
  return n;
}

bool ParamSet::operator==(const ParamSet& other) const {
  auto same = [](const std::map<std::string, Array>& a, const std::map<std::string, Array>& b) {
    if (a.size() != b.size()) return false;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->second.shape() != ib->second.shape() ||
          ia->second.storage() != ib->second.storage()) {
        return false;
      }
    }
    return true;
  };
  return same(params, other.params) && same(buffers, other.buffers);
}

GridShape network_grid(const StftConfig& stft, std::size_t slice_len) {
  return GridShape{stft.frame_count(slice_len), stft.bins() - 1};
}

// ---------------------------------------------------------------------------
// Initialization

namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(mix_seed(seed)) {}

  Array uniform(Shape shape, double fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Array a(std::move(shape));
    for (double& v : a.data()) v = dist(rng_);
    return a;
  }

 private:
  std::mt19937_64 rng_;
};

void add_batch_norm(ParamSet& ps, const std::string& prefix, std::size_t channels) {
  ps.params[prefix + ".gamma"] = Array(Shape{channels}, 1.0);
  ps.params[prefix + ".beta"] = Array(Shape{channels}, 0.0);
  ps.buffers[prefix + ".running_mean"] = Array(Shape{channels}, 0.0);
  ps.buffers[prefix + ".running_var"] = Array(Shape{channels}, 1.0);
}

void add_encoder(ParamSet& ps, Initializer& init, const std::string& prefix,
                 const std::vector<BlockSpec>& blocks, std::size_t in_channels) {
  std::size_t c = in_channels;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string p = fmt::format("{}.enc{}", prefix, i);
    ps.params[p + ".conv.w"] = init.uniform(Shape{b.out_channels, c, b.kernel_h, b.kernel_w},
                                            static_cast<double>(c * b.kernel_h * b.kernel_w));
    add_batch_norm(ps, p + ".bn", b.out_channels);
    c = b.out_channels;
  }
}

std::size_t decoder_in_channels(const GeneratorConfig& cfg, std::size_t j) {
  const std::size_t n = cfg.encoder.size();
  if (j == 0) return cfg.encoder[n - 1].out_channels;
  const std::size_t c = cfg.encoder[n - 1 - j].out_channels;
  return cfg.skip_connections ? 2 * c : c;
}

std::size_t decoder_out_channels(const GeneratorConfig& cfg, std::size_t j) {
  const std::size_t n = cfg.encoder.size();
  return j + 1 < n ? cfg.encoder[n - 2 - j].out_channels : cfg.encoder[0].out_channels;
}

}  // namespace

ParamSet init_generator(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamSet ps;
  Initializer init(seed);
  add_encoder(ps, init, "gen", cfg.encoder, 2);
  const std::size_t n = cfg.encoder.size();
  for (std::size_t j = 0; j < n; ++j) {
    const auto& b = cfg.encoder[n - 1 - j];
    const std::size_t cin = decoder_in_channels(cfg, j);
    const std::size_t cout = decoder_out_channels(cfg, j);
    const std::string p = fmt::format("gen.dec{}", j);
    // Each output of a transposed conv sees about cin*kh*kw/(sh*sw) inputs.
    const double fan_in = static_cast<double>(cin * b.kernel_h * b.kernel_w) /
                          static_cast<double>(b.stride_h * b.stride_w);
    ps.params[p + ".deconv.w"] = init.uniform(Shape{cin, cout, b.kernel_h, b.kernel_w}, fan_in);
    add_batch_norm(ps, p + ".bn", cout);
  }
  const std::size_t c0 = cfg.encoder[0].out_channels;
  ps.params["gen.head.w"] = init.uniform(Shape{2, c0, 1, 1}, static_cast<double>(c0));
  ps.params["gen.head.b"] = Array(Shape{2}, 0.0);
  return ps;
}

namespace {

std::size_t conv_len(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  if (in + 2 * p < k) throw ConfigError("kernel larger than padded feature map");
  return (in + 2 * p - k) / s + 1;
}

struct FeatureShape {
  std::size_t channels, frames, bins;
};

FeatureShape backbone_shape(const std::vector<BlockSpec>& blocks, const GridShape& grid, std::size_t upto) {
  FeatureShape s{2, grid.frames, grid.bins};
  for (std::size_t i = 0; i < upto; ++i) {
    const auto& b = blocks[i];
    s = {b.out_channels, conv_len(s.frames, b.kernel_h, b.stride_h, b.pad_h),
         conv_len(s.bins, b.kernel_w, b.stride_w, b.pad_w)};
  }
  return s;
}

}  // namespace

ParamSet init_discriminator(const DiscriminatorConfig& cfg, const GridShape& grid, std::uint64_t seed) {
  cfg.validate();
  ParamSet ps;
  Initializer init(seed);
  add_encoder(ps, init, "disc", cfg.backbone, 2);
  FeatureShape s = backbone_shape(cfg.backbone, grid, cfg.backbone.size());
  std::size_t c = 2 * s.channels;
  for (std::size_t i = 0; i < cfg.head.size(); ++i) {
    const auto& h = cfg.head[i];
    const std::string p = fmt::format("disc.head{}", i);
    ps.params[p + ".w"] = init.uniform(Shape{h.out_channels, c, h.kernel_h, h.kernel_w},
                                       static_cast<double>(c * h.kernel_h * h.kernel_w));
    ps.params[p + ".b"] = Array(Shape{h.out_channels}, 0.0);
    s = {h.out_channels, conv_len(s.frames, h.kernel_h, 1, h.pad_h), conv_len(s.bins, h.kernel_w, 1, h.pad_w)};
    c = h.out_channels;
  }
  const std::size_t flat = s.channels * s.frames * s.bins;
  ps.params["disc.fc.w"] = init.uniform(Shape{1, flat}, static_cast<double>(flat));
  ps.params["disc.fc.b"] = Array(Shape{1}, 0.0);
  return ps;
}

// ---------------------------------------------------------------------------
// Binding and forward passes

Var Binding::at(const std::string& key) const {
  auto it = vars.find(key);
  if (it == vars.end()) throw ConfigError(fmt::format("parameter '{}' missing from parameter set", key));
  return it->second;
}

Binding bind(Tape& tape, const ParamSet& params, bool trainable) {
  Binding b;
  for (const auto& [key, value] : params.params) {
    b.vars.emplace(key, trainable ? tape.parameter(key, value) : tape.constant(value));
  }
  return b;
}

void apply_batch_norm_updates(ParamSet& params, const BatchNormUpdates& updates, double momentum) {
  for (const auto& [prefix, stats] : updates) {
    Array& mean = params.buffers.at(prefix + ".running_mean");
    Array& var = params.buffers.at(prefix + ".running_var");
    for (std::size_t c = 0; c < mean.size(); ++c) {
      mean[c] = momentum * mean[c] + (1.0 - momentum) * stats.mean[c];
      var[c] = momentum * var[c] + (1.0 - momentum) * stats.var[c];
    }
  }
}

Array spectra_to_planes(const std::vector<ComplexSpectrogram>& specs) {
  if (specs.empty()) throw ShapeError("spectra_to_planes: empty batch");
  const std::size_t frames = specs[0].frames();
  const std::size_t bins = specs[0].bins();
  const std::size_t plane = frames * bins;
  Array out(Shape{specs.size(), 2, frames, bins});
  for (std::size_t n = 0; n < specs.size(); ++n) {
    if (specs[n].frames() != frames || specs[n].bins() != bins) throw ShapeError("spectra_to_planes: ragged batch");
    double* re = out.ptr() + n * 2 * plane;
    double* im = re + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      re[i] = specs[n].data()[i].real();
      im[i] = specs[n].data()[i].imag();
    }
  }
  return out;
}

namespace {

Var batch_norm_layer(Tape& tape, const Binding& params, const std::string& prefix, Var x,
                     const ForwardOptions& opts) {
  ag::BatchNormOptions bn;
  bn.training = opts.training;
  ag::BatchNormStats stats;
  if (opts.training) {
    bn.stats_out = opts.bn_updates ? &stats : nullptr;
  } else {
    if (!opts.state) throw ConfigError("inference forward needs batch-norm running statistics");
    bn.running_mean = &opts.state->buffers.at(prefix + ".running_mean").storage();
    bn.running_var = &opts.state->buffers.at(prefix + ".running_var").storage();
  }
  Var y = ag::batch_norm(tape, x, params.at(prefix + ".gamma"), params.at(prefix + ".beta"), bn);
  if (opts.training && opts.bn_updates) (*opts.bn_updates)[prefix] = std::move(stats);
  return y;
}

// Drops the Nyquist bin: (N, 2, T, F + 1) -> (N, 2, T, F).
Array drop_nyquist(const Array& planes) {
  const std::size_t n = planes.dim(0), frames = planes.dim(2), bins = planes.dim(3);
  Array out(Shape{n, 2, frames, bins - 1});
  for (std::size_t r = 0; r < n * 2 * frames; ++r) {
    std::copy_n(planes.ptr() + r * bins, bins - 1, out.ptr() + r * (bins - 1));
  }
  return out;
}

Array compress_constant(const Array& planes, double power) {
  if (power == 1.0) return planes;
  Array out(planes.shape());
  const std::size_t plane = planes.dim(2) * planes.dim(3);
  for (std::size_t s = 0; s < planes.dim(0); ++s) {
    const std::size_t re = s * 2 * plane, im = re + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double a = planes[re + i], b = planes[im + i];
      const double scale = std::pow(a * a + b * b + 1e-8, 0.5 * (power - 1.0));
      out[re + i] = a * scale;
      out[im + i] = b * scale;
    }
  }
  return out;
}

}  // namespace

GeneratorOutput generator_forward(Tape& tape, const Binding& params, const GeneratorConfig& cfg,
                                  const StftConfig& stft, const Array& noisy_planes,
                                  const ForwardOptions& opts, std::optional<std::uint64_t> z_seed) {
  if (noisy_planes.rank() != 4 || noisy_planes.dim(1) != 2 || noisy_planes.dim(3) != stft.bins()) {
    throw ShapeError("generator_forward: expected (N, 2, frames, " + std::to_string(stft.bins()) +
                     ") planes, got " + ag::shape_str(noisy_planes.shape()));
  }
  const std::size_t frames = noisy_planes.dim(2);
  const std::size_t bins = stft.bins() - 1;
  if (frames % cfg.frame_stride() != 0 || bins % cfg.bin_stride() != 0) {
    throw ShapeError(fmt::format("generator_forward: grid {}x{} not divisible by encoder stride {}x{}", frames,
                                 bins, cfg.frame_stride(), cfg.bin_stride()));
  }
  const std::size_t n = cfg.encoder.size();
  Var x = tape.constant(compress_constant(drop_nyquist(noisy_planes), cfg.input_power));

  std::vector<Var> skips;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = fmt::format("gen.enc{}", i);
    x = ag::conv2d(tape, x, params.at(p + ".conv.w"), cfg.encoder[i].geometry());
    x = ag::leaky_relu(tape, batch_norm_layer(tape, params, p + ".bn", x, opts), cfg.leaky_slope);
    skips.push_back(x);
  }
  if (cfg.latent.enabled && z_seed) {
    std::mt19937_64 rng(mix_seed(*z_seed));
    std::normal_distribution<double> gauss(cfg.latent.mean, std::sqrt(cfg.latent.variance));
    Array z(tape.value(x).shape());
    for (double& v : z.data()) v = gauss(rng);
    x = ag::add(tape, x, tape.constant(std::move(z)));
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0 && cfg.skip_connections) x = ag::concat(tape, {x, skips[n - 1 - j]}, 1);
    const std::string p = fmt::format("gen.dec{}", j);
    x = ag::deconv2d(tape, x, params.at(p + ".deconv.w"), cfg.encoder[n - 1 - j].geometry());
    x = ag::leaky_relu(tape, batch_norm_layer(tape, params, p + ".bn", x, opts), cfg.leaky_slope);
  }
  Var head = ag::conv2d(tape, x, params.at("gen.head.w"), params.at("gen.head.b"), ag::Conv2dGeometry{});
  Var mask = ag::tanh(tape, head);
  const Shape expected{noisy_planes.dim(0), 2, frames, bins};
  if (tape.value(mask).shape() != expected) {
    throw ShapeError(fmt::format("generator_forward: mask shape {} != input grid {}",
                                 ag::shape_str(tape.value(mask).shape()), ag::shape_str(expected)));
  }
  Var full_mask = ag::concat(tape, {mask, ag::slice_range(tape, mask, 3, bins - 1, bins)}, 3);
  Var noisy = tape.constant(noisy_planes);
  GeneratorOutput out;
  out.mask = full_mask;
  out.enhanced_spec = ag::complex_cell_mul(tape, noisy, full_mask);
  out.enhanced_wave = ag::istft_op(tape, out.enhanced_spec, stft);
  return out;
}

namespace {

Var backbone(Tape& tape, const Binding& params, const DiscriminatorConfig& cfg, Var x,
             const ForwardOptions& opts, TapMap* taps) {
  for (std::size_t i = 0; i < cfg.backbone.size(); ++i) {
    const std::string p = fmt::format("disc.enc{}", i);
    x = ag::conv2d(tape, x, params.at(p + ".conv.w"), cfg.backbone[i].geometry());
    x = ag::leaky_relu(tape, batch_norm_layer(tape, params, p + ".bn", x, opts), cfg.leaky_slope);
    const int layer = static_cast<int>(i) + 1;
    if (taps && std::find(cfg.tap_layers.begin(), cfg.tap_layers.end(), layer) != cfg.tap_layers.end()) {
      (*taps)[layer] = x;
    }
  }
  return x;
}

Var discriminator_input(Tape& tape, Var planes, double power) {
  const Array& v = tape.value(planes);
  if (v.rank() != 4 || v.dim(1) != 2) {
    throw ShapeError("discriminator_forward: expected (N, 2, T, F) planes, got " + ag::shape_str(v.shape()));
  }
  Var x = ag::slice_range(tape, planes, 3, 0, v.dim(3) - 1);
  return power == 1.0 ? x : ag::magnitude_compress(tape, x, power);
}

}  // namespace

DiscriminatorOutput discriminator_forward(Tape& tape, const Binding& params, const DiscriminatorConfig& cfg,
                                          Var candidate, Var condition, const ForwardOptions& opts) {
  if (tape.value(candidate).shape() != tape.value(condition).shape()) {
    throw ShapeError(fmt::format("discriminator_forward: candidate {} vs condition {}",
                                 ag::shape_str(tape.value(candidate).shape()),
                                 ag::shape_str(tape.value(condition).shape())));
  }
  DiscriminatorOutput out;
  ForwardOptions branch_opts = opts;
  // Running statistics of the discriminator are never used at inference.
  branch_opts.bn_updates = nullptr;
  Var hc = backbone(tape, params, cfg, discriminator_input(tape, candidate, cfg.input_power), branch_opts, &out.taps);
  Var hy = backbone(tape, params, cfg, discriminator_input(tape, condition, cfg.input_power), branch_opts, nullptr);
  Var h = ag::concat(tape, {hc, hy}, 1);
  for (std::size_t i = 0; i < cfg.head.size(); ++i) {
    const auto& spec = cfg.head[i];
    const std::string p = fmt::format("disc.head{}", i);
    h = ag::conv2d(tape, h, params.at(p + ".w"), params.at(p + ".b"), ag::Conv2dGeometry{1, 1, spec.pad_h, spec.pad_w});
    h = ag::leaky_relu(tape, h, cfg.leaky_slope);
  }
  const std::size_t batch = tape.value(h).dim(0);
  Var flat = ag::reshape(tape, h, Shape{batch, tape.value(h).size() / batch});
  out.score = ag::linear(tape, flat, params.at("disc.fc.w"), params.at("disc.fc.b"));
  return out;
}

}  // namespace c2f
