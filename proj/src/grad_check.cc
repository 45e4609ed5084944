// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/grad_check.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>

#include <fmt/format.h>

#include "c2f/errors.h"
#include "c2f/hash.h"
#include "c2f/losses.h"
#include "c2f/networks.h"
#include "c2f/ops.h"

namespace c2f::ag {

namespace {

enum class Sample { kAny, kPositive, kAwayFromZero };

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct Entry {
  std::vector<Shape> shapes;
  std::vector<Sample> sampling;       // one per input
  std::vector<bool> differentiable;   // inputs that are perturbed
  Builder build;
  double threshold = 1e-4;
};

StftConfig small_stft() { return StftConfig(16, 4); }

Entry unary(Shape s, Sample k, Builder b) { return Entry{{s}, {k}, {true}, std::move(b)}; }

Entry binary(Shape a, Shape b, Builder f, Sample ka = Sample::kAny, Sample kb = Sample::kAny) {
  return Entry{{a, b}, {ka, kb}, {true, true}, std::move(f)};
}

const std::map<std::string, Entry>& catalog() {
  static const std::map<std::string, Entry> entries = [] {
    std::map<std::string, Entry> m;
    const Shape v{3, 4};
    m["add"] = binary(v, v, [](Tape& t, const std::vector<Var>& in) { return add(t, in[0], in[1]); });
    m["sub"] = binary(v, v, [](Tape& t, const std::vector<Var>& in) { return sub(t, in[0], in[1]); });
    m["mul"] = binary(v, v, [](Tape& t, const std::vector<Var>& in) { return mul(t, in[0], in[1]); });
    m["scalar_mul"] = unary(v, Sample::kAny, [](Tape& t, const std::vector<Var>& in) { return scalar_mul(t, in[0], -1.7); });
    m["add_scalar"] = unary(v, Sample::kAny, [](Tape& t, const std::vector<Var>& in) { return add_scalar(t, in[0], 0.3); });
    m["leaky_relu"] = unary(v, Sample::kAwayFromZero,
                            [](Tape& t, const std::vector<Var>& in) { return leaky_relu(t, in[0], 0.2); });
    m["tanh"] = unary(v, Sample::kAny, [](Tape& t, const std::vector<Var>& in) { return ag::tanh(t, in[0]); });
    m["sqrt"] = unary(v, Sample::kPositive, [](Tape& t, const std::vector<Var>& in) { return ag::sqrt(t, in[0]); });
    m["square"] = unary(v, Sample::kAny, [](Tape& t, const std::vector<Var>& in) { return square(t, in[0]); });
    m["matmul"] = binary({3, 4}, {4, 2}, [](Tape& t, const std::vector<Var>& in) { return matmul(t, in[0], in[1]); });
    m["linear"] = Entry{{{3, 5}, {2, 5}, {2}},
                        {Sample::kAny, Sample::kAny, Sample::kAny},
                        {true, true, true},
                        [](Tape& t, const std::vector<Var>& in) { return linear(t, in[0], in[1], in[2]); }};
    m["conv2d"] = Entry{{{2, 3, 8, 8}, {4, 3, 3, 3}, {4}},
                        {Sample::kAny, Sample::kAny, Sample::kAny},
                        {true, true, true},
                        [](Tape& t, const std::vector<Var>& in) {
                          return conv2d(t, in[0], in[1], in[2], Conv2dGeometry{2, 2, 1, 1});
                        }};
    m["deconv2d"] = Entry{{{2, 3, 4, 5}, {3, 2, 3, 4}, {2}},
                          {Sample::kAny, Sample::kAny, Sample::kAny},
                          {true, true, true},
                          [](Tape& t, const std::vector<Var>& in) {
                            return deconv2d(t, in[0], in[1], in[2], Conv2dGeometry{1, 2, 1, 1});
                          }};
    m["batch_norm"] = Entry{{{3, 2, 2, 3}, {2}, {2}},
                            {Sample::kAny, Sample::kAny, Sample::kAny},
                            {true, true, true},
                            [](Tape& t, const std::vector<Var>& in) {
                              return batch_norm(t, in[0], in[1], in[2], BatchNormOptions{});
                            }};
    m["reshape"] = unary({2, 6}, Sample::kAny, [](Tape& t, const std::vector<Var>& in) {
      return reshape(t, in[0], Shape{3, 2, 2});
    });
    m["slice_range"] = unary({2, 3, 5}, Sample::kAny, [](Tape& t, const std::vector<Var>& in) {
      return slice_range(t, in[0], 2, 1, 4);
    });
    m["concat"] = binary({2, 3, 2}, {2, 1, 2}, [](Tape& t, const std::vector<Var>& in) {
      return concat(t, {in[0], in[1]}, 1);
    });
    m["reduce_sum"] = unary(v, Sample::kAny, [](Tape& t, const std::vector<Var>& in) { return reduce_sum(t, in[0]); });
    m["reduce_mean"] = unary(v, Sample::kAny, [](Tape& t, const std::vector<Var>& in) { return reduce_mean(t, in[0]); });
    m["abs_sum"] = unary(v, Sample::kAwayFromZero, [](Tape& t, const std::vector<Var>& in) { return abs_sum(t, in[0]); });
    m["dot"] = binary(v, v, [](Tape& t, const std::vector<Var>& in) { return dot(t, in[0], in[1]); });
    m["l2_norm"] = unary(v, Sample::kAny, [](Tape& t, const std::vector<Var>& in) { return l2_norm(t, in[0]); });
    m["complex_cell_mul"] = binary({2, 2, 3, 4}, {2, 2, 3, 4}, [](Tape& t, const std::vector<Var>& in) {
      return complex_cell_mul(t, in[0], in[1]);
    });
    m["magnitude_compress"] = unary({1, 2, 3, 4}, Sample::kAwayFromZero, [](Tape& t, const std::vector<Var>& in) {
      return magnitude_compress(t, in[0], 0.5);
    });
    m["istft_op"] = unary({2, 2, 3, 9}, Sample::kAny, [](Tape& t, const std::vector<Var>& in) {
      return istft_op(t, in[0], small_stft());
    });
    m["cosine_loss"] = binary({2, 8}, {2, 8}, [](Tape& t, const std::vector<Var>& in) {
      return cosine_loss(t, in[0], in[1]);
    });
    m["granular_cosine_loss"] = binary({2, 8}, {2, 8}, [](Tape& t, const std::vector<Var>& in) {
      return granular_cosine_loss(t, in[0], in[1], 4);
    });
    m["signal_noise_loss"] = Entry{{{2, 8}, {2, 8}, {2, 8}},
                                   {Sample::kAny, Sample::kAny, Sample::kAny},
                                   {true, false, false},
                                   [](Tape& t, const std::vector<Var>& in) {
                                     return signal_noise_loss(t, in[0], t.value(in[1]), t.value(in[2]), 4);
                                   }};
    m["adversarial_least_squares"] = binary({4, 1}, {4, 1}, [](Tape& t, const std::vector<Var>& in) {
      AdversarialLosses l = adversarial_losses(t, in[0], in[1], AdversarialForm::kLeastSquares);
      return add(t, l.d_loss, scalar_mul(t, l.g_adv, 0.7));
    });
    m["adversarial_log"] = binary({4, 1}, {4, 1}, [](Tape& t, const std::vector<Var>& in) {
      AdversarialLosses l = adversarial_losses(t, in[0], in[1], AdversarialForm::kLog);
      return add(t, l.d_loss, scalar_mul(t, l.g_adv, 0.7));
    });
    // Features differ by a sampled offset, keeping |f - r| away from the kink.
    m["dynamic_perceptual_loss"] = binary({2, 3, 2, 2}, {2, 3, 2, 2}, [](Tape& t, const std::vector<Var>& in) {
      return dynamic_perceptual_loss(t, TapMap{{3, in[0]}}, TapMap{{3, add(t, in[0], in[1])}}, 3);
    }, Sample::kAny, Sample::kAwayFromZero);
    return m;
  }();
  return entries;
}

Array sample(const Shape& shape, Sample kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  Array a(shape);
  for (double& x : a.data()) {
    switch (kind) {
      case Sample::kAny: x = u(rng); break;
      case Sample::kPositive: x = 0.2 + mag(rng); break;
      case Sample::kAwayFromZero: x = (u(rng) < 0.0 ? -1.0 : 1.0) * mag(rng); break;
    }
  }
  return a;
}

struct Comparison {
  double rel = 0.0;
  double abs = 0.0;
};

void compare(double analytic, double numeric, double floor, Comparison& c) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  const double err = std::abs(analytic - numeric);
  if (scale >= floor) {
    c.rel = std::max(c.rel, err / scale);
  } else {
    c.abs = std::max(c.abs, err);
  }
}

GradCheckResult check_entry(const std::string& name, const Entry& e, std::uint64_t seed,
                            const std::vector<Shape>& shapes, const GradCheckOptions& opt) {
  std::mt19937_64 rng(derive_seed(seed, {fnv1a64(name)}));
  std::vector<Array> inputs;
  for (std::size_t i = 0; i < shapes.size(); ++i) inputs.push_back(sample(shapes[i], e.sampling[i], rng));

  // Output shape and projection.
  Array projection;
  bool have_projection = false;
  auto evaluate = [&](const std::vector<Array>& values) {
    Tape t;
    std::vector<Var> vars;
    for (const auto& v : values) vars.push_back(t.constant(v));
    Var out = e.build(t, vars);
    if (!have_projection) {
      projection = sample(t.value(out).shape(), Sample::kAny, rng);
      have_projection = true;
    }
    // Extended accumulation keeps summation rounding out of the difference quotient.
    long double acc = 0.0L;
    const Array& o = t.value(out);
    for (std::size_t i = 0; i < o.size(); ++i) acc += static_cast<long double>(o[i]) * projection[i];
    return acc;
  };
  evaluate(inputs);

  Tape t;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    vars.push_back(e.differentiable[i] ? t.parameter(fmt::format("in{}", i), inputs[i]) : t.constant(inputs[i]));
  }
  Var out = e.build(t, vars);
  Var loss = dot(t, out, t.constant(projection));
  GradientMap grads = backward(t, loss);

  GradCheckResult r;
  r.op = name;
  r.seed = seed;
  r.threshold = e.threshold;
  Comparison c;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!e.differentiable[i]) continue;
    const Array& g = grads.at(fmt::format("in{}", i));
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      std::vector<Array> plus = inputs, minus = inputs;
      plus[i][k] += opt.step;
      minus[i][k] -= opt.step;
      // Divide by the step actually taken after rounding the perturbed inputs.
      const double taken = plus[i][k] - minus[i][k];
      const double numeric = static_cast<double>((evaluate(plus) - evaluate(minus)) / taken);
      compare(g[k], numeric, opt.abs_floor, c);
      ++r.elements;
    }
  }
  r.max_rel_error = c.rel;
  r.max_abs_error = c.abs;
  return r;
}

// Tiny generator: cosine loss of the enhanced wave against a random target,
// differentiated w.r.t. the first encoder kernel.
GradCheckResult check_generator(std::uint64_t seed, const GradCheckOptions& opt) {
  GeneratorConfig cfg;
  cfg.encoder = {BlockSpec{3, 3, 4, 1, 2, 1, 1}, BlockSpec{4, 3, 4, 1, 2, 1, 1}};
  const StftConfig stft = small_stft();
  const std::size_t frames = 4, batch = 2;
  const ParamSet params = init_generator(cfg, seed);
  std::mt19937_64 rng(derive_seed(seed, {fnv1a64("generator")}));
  Array noisy = sample(Shape{batch, 2, frames, stft.bins()}, Sample::kAny, rng);
  Array target = sample(Shape{batch, stft.signal_length(frames)}, Sample::kAny, rng);
  const std::string key = "gen.enc0.conv.w";

  auto evaluate = [&](const ParamSet& ps, bool trainable, GradientMap* grads) {
    Tape t;
    Binding b;
    for (const auto& [k, v] : ps.params) {
      b.vars.emplace(k, trainable && k == key ? t.parameter(k, v) : t.constant(v));
    }
    GeneratorOutput out = generator_forward(t, b, cfg, stft, noisy, ForwardOptions{});
    Var loss = cosine_loss(t, out.enhanced_wave, t.constant(target));
    if (grads) *grads = backward(t, loss);
    return t.value(loss).item();
  };
  GradientMap grads;
  evaluate(params, true, &grads);
  const Array& g = grads.at(key);

  GradCheckResult r;
  r.op = "generator";
  r.seed = seed;
  r.threshold = 1e-3;
  Comparison c;
  for (std::size_t k = 0; k < g.size(); ++k) {
    ParamSet plus = params, minus = params;
    plus.params.at(key)[k] += opt.step;
    minus.params.at(key)[k] -= opt.step;
    const double numeric = (evaluate(plus, false, nullptr) - evaluate(minus, false, nullptr)) / (2.0 * opt.step);
    compare(g[k], numeric, opt.abs_floor, c);
    ++r.elements;
  }
  r.max_rel_error = c.rel;
  r.max_abs_error = c.abs;
  return r;
}

}  // namespace

std::vector<std::string> grad_check_ops() {
  std::vector<std::string> names;
  for (const auto& [name, e] : catalog()) names.push_back(name);
  names.push_back("generator");
  return names;
}

GradCheckResult grad_check(const std::string& op, std::uint64_t seed, const std::vector<Shape>& input_shapes,
                           const GradCheckOptions& options) {
  if (op == "generator") return check_generator(seed, options);
  auto it = catalog().find(op);
  if (it == catalog().end()) throw ConfigError(fmt::format("grad_check: unknown op '{}'", op));
  const Entry& e = it->second;
  if (!input_shapes.empty() && input_shapes.size() != e.shapes.size()) {
    throw ShapeError(fmt::format("grad_check: op '{}' takes {} inputs, got {} shapes", op, e.shapes.size(),
                                 input_shapes.size()));
  }
  return check_entry(op, e, seed, input_shapes.empty() ? e.shapes : input_shapes, options);
}

}  // namespace c2f::ag
