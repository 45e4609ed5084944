// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/ops.h"

#include <algorithm>
#include <utility>
#include <cmath>
#include <memory>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "c2f/errors.h"

namespace c2f::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

[[noreturn]] void shape_fail(Op op, const Shape& a, const Shape& b, std::string_view why = {}) {
  throw ShapeError(fmt::format("{}: incompatible shapes {} and {}{}{}", op_name(op), shape_str(a),
                               shape_str(b), why.empty() ? "" : ": ", why));
}

void require_same(const Tape& t, Op op, Var a, Var b) {
  if (t.value(a).shape() != t.value(b).shape()) shape_fail(op, t.value(a).shape(), t.value(b).shape());
}

template <typename F>
Var unary(Tape& t, Op op, Var x, F&& fwd_and_deriv) {
  const Array& xv = t.value(x);
  Array out(xv.shape());
  auto deriv = std::make_shared<std::vector<double>>(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    auto [y, d] = fwd_and_deriv(xv[i]);
    out[i] = y;
    (*deriv)[i] = d;
  }
  return t.record(op, {x}, std::move(out), [x, deriv](Tape& tape, const Array& g) {
    Array& gx = tape.adjoint(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*deriv)[i];
  });
}

Array scalar_array(double v) { return Array::scalar(v); }

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Var add(Tape& t, Var a, Var b) {
  require_same(t, Op::kAdd, a, b);
  const Array& av = t.value(a);
  const Array& bv = t.value(b);
  Array out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return t.record(Op::kAdd, {a, b}, std::move(out), [a, b](Tape& tape, const Array& g) {
    for (Var v : {a, b}) {
      if (!tape.requires_grad(v)) continue;
      Array& gv = tape.adjoint(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

Var sub(Tape& t, Var a, Var b) {
  require_same(t, Op::kSub, a, b);
  const Array& av = t.value(a);
  const Array& bv = t.value(b);
  Array out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return t.record(Op::kSub, {a, b}, std::move(out), [a, b](Tape& tape, const Array& g) {
    if (tape.requires_grad(a)) {
      Array& ga = tape.adjoint(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tape.requires_grad(b)) {
      Array& gb = tape.adjoint(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Tape& t, Var a, Var b) {
  require_same(t, Op::kMul, a, b);
  const Array& av = t.value(a);
  const Array& bv = t.value(b);
  Array out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return t.record(Op::kMul, {a, b}, std::move(out), [a, b](Tape& tape, const Array& g) {
    if (tape.requires_grad(a)) {
      const Array& bv = tape.value(b);
      Array& ga = tape.adjoint(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.requires_grad(b)) {
      const Array& av = tape.value(a);
      Array& gb = tape.adjoint(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scalar_mul(Tape& t, Var a, double k) {
  return unary(t, Op::kScalarMul, a, [k](double x) { return std::pair{k * x, k}; });
}

Var add_scalar(Tape& t, Var a, double k) {
  return unary(t, Op::kAddScalar, a, [k](double x) { return std::pair{x + k, 1.0}; });
}

Var leaky_relu(Tape& t, Var x, double slope) {
  return unary(t, Op::kLeakyRelu, x, [slope](double v) {
    return v >= 0.0 ? std::pair{v, 1.0} : std::pair{slope * v, slope};
  });
}

Var tanh(Tape& t, Var x) {
  // std::tanh rounds to +-1 beyond |v| ~ 19; keep the open range.
  return unary(t, Op::kTanh, x, [](double v) {
    static constexpr double kEdge = 1.0 - 0x1p-53;
    const double y = std::clamp(std::tanh(v), -kEdge, kEdge);
    return std::pair{y, 1.0 - y * y};
  });
}

Var sqrt(Tape& t, Var x) {
  const Array& xv = t.value(x);
  for (double v : xv.data()) {
    if (!(v >= 0.0)) throw ShapeError(fmt::format("sqrt: negative input {}", v));
  }
  return unary(t, Op::kSqrt, x, [](double v) {
    const double y = std::sqrt(v);
    return std::pair{y, y > 0.0 ? 0.5 / y : 0.0};
  });
}

Var square(Tape& t, Var x) {
  return unary(t, Op::kSquare, x, [](double v) { return std::pair{v * v, 2.0 * v}; });
}

// ---------------------------------------------------------------------------
// Dense products

Var matmul(Tape& t, Var a, Var b) {
  const Array& av = t.value(a);
  const Array& bv = t.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    shape_fail(Op::kMatmul, av.shape(), bv.shape());
  }
  const auto m = static_cast<Eigen::Index>(av.dim(0));
  const auto k = static_cast<Eigen::Index>(av.dim(1));
  const auto n = static_cast<Eigen::Index>(bv.dim(1));
  Array out(Shape{av.dim(0), bv.dim(1)});
  MapMat(out.ptr(), m, n).noalias() = ConstMapMat(av.ptr(), m, k) * ConstMapMat(bv.ptr(), k, n);
  return t.record(Op::kMatmul, {a, b}, std::move(out), [a, b, m, k, n](Tape& tape, const Array& g) {
    ConstMapMat gm(g.ptr(), m, n);
    if (tape.requires_grad(a)) {
      MapMat(tape.adjoint(a).ptr(), m, k).noalias() += gm * ConstMapMat(tape.value(b).ptr(), k, n).transpose();
    }
    if (tape.requires_grad(b)) {
      MapMat(tape.adjoint(b).ptr(), k, n).noalias() += ConstMapMat(tape.value(a).ptr(), m, k).transpose() * gm;
    }
  });
}

Var linear(Tape& t, Var x, Var w, Var b) {
  const Array& xv = t.value(x);
  const Array& wv = t.value(w);
  const Array& bv = t.value(b);
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1)) shape_fail(Op::kLinear, xv.shape(), wv.shape());
  if (bv.size() != wv.dim(0)) shape_fail(Op::kLinear, wv.shape(), bv.shape(), "bias length");
  const auto n = static_cast<Eigen::Index>(xv.dim(0));
  const auto d = static_cast<Eigen::Index>(xv.dim(1));
  const auto o = static_cast<Eigen::Index>(wv.dim(0));
  Array out(Shape{xv.dim(0), wv.dim(0)});
  MapMat om(out.ptr(), n, o);
  om.noalias() = ConstMapMat(xv.ptr(), n, d) * ConstMapMat(wv.ptr(), o, d).transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < o; ++j) om(i, j) += bv[static_cast<std::size_t>(j)];
  }
  return t.record(Op::kLinear, {x, w, b}, std::move(out), [x, w, b, n, d, o](Tape& tape, const Array& g) {
    ConstMapMat gm(g.ptr(), n, o);
    if (tape.requires_grad(x)) {
      MapMat(tape.adjoint(x).ptr(), n, d).noalias() += gm * ConstMapMat(tape.value(w).ptr(), o, d);
    }
    if (tape.requires_grad(w)) {
      MapMat(tape.adjoint(w).ptr(), o, d).noalias() += gm.transpose() * ConstMapMat(tape.value(x).ptr(), n, d);
    }
    if (tape.requires_grad(b)) {
      Array& gb = tape.adjoint(b);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < o; ++j) gb[static_cast<std::size_t>(j)] += gm(i, j);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvDims {
  std::size_t n, c, h, w;       // image batch
  std::size_t kh, kw;
  std::size_t oh, ow;           // output of the forward convolution
  Conv2dGeometry g;
  std::size_t k() const { return c * kh * kw; }
  std::size_t p() const { return oh * ow; }
};

// Output columns x whose tap j lands inside the image: 0 <= x*s + j - pad < w.
std::pair<std::size_t, std::size_t> valid_columns(const ConvDims& d, std::size_t j) {
  const std::size_t s = d.g.stride_w;
  const std::size_t x0 = j >= d.g.pad_w ? 0 : (d.g.pad_w - j + s - 1) / s;
  const std::size_t limit = d.w + d.g.pad_w;  // need x*s + j < limit
  const std::size_t x1 = j >= limit ? 0 : std::min(d.ow, (limit - j + s - 1) / s);
  return {std::min(x0, x1), x1};
}

// Image (C, H, W) -> column block (C*kh*kw) x (oh*ow) written at column
// `col0` of a row-major matrix with leading dimension `ld`.
void im2col(const double* img, const ConvDims& d, double* cols, std::size_t ld, std::size_t col0) {
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j) {
        double* row = cols + ((c * d.kh + i) * d.kw + j) * ld + col0;
        for (std::size_t y = 0; y < d.oh; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y * d.g.stride_h + i) - static_cast<std::ptrdiff_t>(d.g.pad_h);
          double* dst = row + y * d.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) {
            std::fill(dst, dst + d.ow, 0.0);
            continue;
          }
          const double* src = img + (c * d.h + static_cast<std::size_t>(iy)) * d.w;
          const auto [x0, x1] = valid_columns(d, j);
          std::fill(dst, dst + x0, 0.0);
          const double* s = src + (x0 * d.g.stride_w + j - d.g.pad_w);
          for (std::size_t x = x0; x < x1; ++x, s += d.g.stride_w) dst[x] = *s;
          std::fill(dst + x1, dst + d.ow, 0.0);
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates the column block back into the image.
void col2im(const double* cols, const ConvDims& d, std::size_t ld, std::size_t col0, double* img) {
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j) {
        const double* row = cols + ((c * d.kh + i) * d.kw + j) * ld + col0;
        for (std::size_t y = 0; y < d.oh; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y * d.g.stride_h + i) - static_cast<std::ptrdiff_t>(d.g.pad_h);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
          const double* src = row + y * d.ow;
          double* dst = img + (c * d.h + static_cast<std::size_t>(iy)) * d.w;
          const auto [x0, x1] = valid_columns(d, j);
          double* t = dst + (x0 * d.g.stride_w + j - d.g.pad_w);
          for (std::size_t x = x0; x < x1; ++x, t += d.g.stride_w) *t += src[x];
        }
      }
    }
  }
}

RowMat batch_im2col(const double* images, const ConvDims& d) {
  RowMat cols(static_cast<Eigen::Index>(d.k()), static_cast<Eigen::Index>(d.n * d.p()));
  const std::size_t ld = d.n * d.p();
  for (std::size_t n = 0; n < d.n; ++n) im2col(images + n * d.c * d.h * d.w, d, cols.data(), ld, n * d.p());
  return cols;
}

// (N, C, P) <-> (C, N*P)
RowMat pack_channels(const double* src, std::size_t n, std::size_t c, std::size_t p) {
  RowMat out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(n * p));
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::copy_n(src + (b * c + ch) * p, p, out.data() + ch * n * p + b * p);
    }
  }
  return out;
}

void unpack_channels_add(const RowMat& packed, std::size_t n, std::size_t c, std::size_t p, double* dst) {
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* s = packed.data() + ch * n * p + b * p;
      double* d = dst + (b * c + ch) * p;
      for (std::size_t i = 0; i < p; ++i) d[i] += s[i];
    }
  }
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t s, std::size_t pad, Op op,
                     const Shape& xs, const Shape& ws) {
  if (s == 0) shape_fail(op, xs, ws, "zero stride");
  if (in + 2 * pad < k) shape_fail(op, xs, ws, "kernel larger than padded input");
  return (in + 2 * pad - k) / s + 1;
}

}  // namespace

Var conv2d(Tape& t, Var x, Var w, const Conv2dGeometry& g) { return conv2d(t, x, w, Var{}, g); }

Var conv2d(Tape& t, Var x, Var w, Var bias, const Conv2dGeometry& g) {
  const Array& xv = t.value(x);
  const Array& wv = t.value(w);
  if (xv.rank() != 4 || wv.rank() != 4 || xv.dim(1) != wv.dim(1)) shape_fail(Op::kConv2d, xv.shape(), wv.shape());
  if (bias.valid() && t.value(bias).size() != wv.dim(0)) {
    shape_fail(Op::kConv2d, wv.shape(), t.value(bias).shape(), "bias length");
  }
  ConvDims d{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), wv.dim(2), wv.dim(3), 0, 0, g};
  d.oh = conv_out(d.h, d.kh, g.stride_h, g.pad_h, Op::kConv2d, xv.shape(), wv.shape());
  d.ow = conv_out(d.w, d.kw, g.stride_w, g.pad_w, Op::kConv2d, xv.shape(), wv.shape());
  const std::size_t o = wv.dim(0);
  const auto ko = static_cast<Eigen::Index>(o);
  const auto kk = static_cast<Eigen::Index>(d.k());

  RowMat cols = batch_im2col(xv.ptr(), d);
  RowMat res = ConstMapMat(wv.ptr(), ko, kk) * cols;
  if (bias.valid()) {
    const Array& bv = t.value(bias);
    for (std::size_t ch = 0; ch < o; ++ch) res.row(static_cast<Eigen::Index>(ch)).array() += bv[ch];
  }
  Array out(Shape{d.n, o, d.oh, d.ow}, 0.0);
  unpack_channels_add(res, d.n, o, d.p(), out.ptr());

  std::vector<Var> inputs{x, w};
  if (bias.valid()) inputs.push_back(bias);
  return t.record(Op::kConv2d, inputs, std::move(out), [x, w, bias, d, o, ko, kk](Tape& tape, const Array& g) {
    RowMat gout = pack_channels(g.ptr(), d.n, o, d.p());
    if (tape.requires_grad(w)) {
      RowMat cols = batch_im2col(tape.value(x).ptr(), d);
      MapMat(tape.adjoint(w).ptr(), ko, kk).noalias() += gout * cols.transpose();
    }
    if (bias.valid() && tape.requires_grad(bias)) {
      Array& gb = tape.adjoint(bias);
      for (std::size_t ch = 0; ch < o; ++ch) gb[ch] += gout.row(static_cast<Eigen::Index>(ch)).sum();
    }
    if (tape.requires_grad(x)) {
      RowMat dcols = ConstMapMat(tape.value(w).ptr(), ko, kk).transpose() * gout;
      Array& gx = tape.adjoint(x);
      const std::size_t ld = d.n * d.p();
      for (std::size_t n = 0; n < d.n; ++n) col2im(dcols.data(), d, ld, n * d.p(), gx.ptr() + n * d.c * d.h * d.w);
    }
  });
}

Var deconv2d(Tape& t, Var x, Var w, const Conv2dGeometry& g) { return deconv2d(t, x, w, Var{}, g); }

Var deconv2d(Tape& t, Var x, Var w, Var bias, const Conv2dGeometry& g) {
  const Array& xv = t.value(x);
  const Array& wv = t.value(w);
  if (xv.rank() != 4 || wv.rank() != 4 || xv.dim(1) != wv.dim(0)) shape_fail(Op::kDeconv2d, xv.shape(), wv.shape());
  if (g.stride_h == 0 || g.stride_w == 0) shape_fail(Op::kDeconv2d, xv.shape(), wv.shape(), "zero stride");
  const std::size_t cin = wv.dim(0);
  const std::size_t cout = wv.dim(1);
  if (bias.valid() && t.value(bias).size() != cout) {
    shape_fail(Op::kDeconv2d, wv.shape(), t.value(bias).shape(), "bias length");
  }
  const std::size_t h = xv.dim(2), wd = xv.dim(3);
  const std::size_t full_h = (h - 1) * g.stride_h + wv.dim(2);
  const std::size_t full_w = (wd - 1) * g.stride_w + wv.dim(3);
  if (full_h <= 2 * g.pad_h || full_w <= 2 * g.pad_w) shape_fail(Op::kDeconv2d, xv.shape(), wv.shape(), "padding too large");
  // `d` describes the convolution that maps the output image back to x.
  ConvDims d{xv.dim(0), cout, full_h - 2 * g.pad_h, full_w - 2 * g.pad_w, wv.dim(2), wv.dim(3), h, wd, g};
  const std::size_t in_p = h * wd;
  const auto kci = static_cast<Eigen::Index>(cin);
  const auto kk = static_cast<Eigen::Index>(d.k());

  RowMat xp = pack_channels(xv.ptr(), d.n, cin, in_p);
  RowMat cols = ConstMapMat(wv.ptr(), kci, kk).transpose() * xp;
  Array out(Shape{d.n, cout, d.h, d.w}, 0.0);
  const std::size_t ld = d.n * in_p;
  for (std::size_t n = 0; n < d.n; ++n) col2im(cols.data(), d, ld, n * in_p, out.ptr() + n * cout * d.h * d.w);
  if (bias.valid()) {
    const Array& bv = t.value(bias);
    const std::size_t plane = d.h * d.w;
    for (std::size_t n = 0; n < d.n; ++n) {
      for (std::size_t c = 0; c < cout; ++c) {
        double* p = out.ptr() + (n * cout + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += bv[c];
      }
    }
  }

  std::vector<Var> inputs{x, w};
  if (bias.valid()) inputs.push_back(bias);
  return t.record(Op::kDeconv2d, inputs, std::move(out),
                  [x, w, bias, d, cin, cout, in_p, kci, kk](Tape& tape, const Array& g) {
    RowMat gcols = batch_im2col(g.ptr(), d);
    if (tape.requires_grad(x)) {
      RowMat gx = ConstMapMat(tape.value(w).ptr(), kci, kk) * gcols;
      unpack_channels_add(gx, d.n, cin, in_p, tape.adjoint(x).ptr());
    }
    if (tape.requires_grad(w)) {
      RowMat xp = pack_channels(tape.value(x).ptr(), d.n, cin, in_p);
      MapMat(tape.adjoint(w).ptr(), kci, kk).noalias() += xp * gcols.transpose();
    }
    if (bias.valid() && tape.requires_grad(bias)) {
      Array& gb = tape.adjoint(bias);
      const std::size_t plane = d.h * d.w;
      for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t c = 0; c < cout; ++c) {
          const double* p = g.ptr() + (n * cout + c) * plane;
          double s = 0.0;
          for (std::size_t i = 0; i < plane; ++i) s += p[i];
          gb[c] += s;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization

Var batch_norm(Tape& t, Var x, Var gamma, Var beta, const BatchNormOptions& opt) {
  const Array& xv = t.value(x);
  if (xv.rank() < 2) shape_fail(Op::kBatchNorm, xv.shape(), t.value(gamma).shape(), "need (N, C, ...)");
  const std::size_t n = xv.dim(0);
  const std::size_t c = xv.dim(1);
  const std::size_t inner = xv.size() / (n * c);
  const double count = static_cast<double>(n * inner);
  if (t.value(gamma).size() != c || t.value(beta).size() != c) {
    shape_fail(Op::kBatchNorm, xv.shape(), t.value(gamma).shape(), "affine length");
  }
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  if (opt.training) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* p = xv.ptr() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) mean[ch] += p[i];
      }
    }
    for (double& m : mean) m /= count;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* p = xv.ptr() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) var[ch] += (p[i] - mean[ch]) * (p[i] - mean[ch]);
      }
    }
    for (double& v : var) v /= count;
    if (opt.stats_out) *opt.stats_out = BatchNormStats{mean, var};
  } else {
    if (!opt.running_mean || !opt.running_var || opt.running_mean->size() != c || opt.running_var->size() != c) {
      throw ShapeError("batch_norm: inference mode needs running statistics per channel");
    }
    mean = *opt.running_mean;
    var = *opt.running_var;
  }
  auto inv_std = std::make_shared<std::vector<double>>(c);
  for (std::size_t ch = 0; ch < c; ++ch) (*inv_std)[ch] = 1.0 / std::sqrt(var[ch] + opt.eps);

  const Array& gm = t.value(gamma);
  const Array& bt = t.value(beta);
  auto xhat = std::make_shared<Array>(xv.shape());
  Array out(xv.shape());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double h = (xv[off + i] - mean[ch]) * (*inv_std)[ch];
        (*xhat)[off + i] = h;
        out[off + i] = gm[ch] * h + bt[ch];
      }
    }
  }
  const bool training = opt.training;
  return t.record(Op::kBatchNorm, {x, gamma, beta}, std::move(out),
                  [x, gamma, beta, xhat, inv_std, n, c, inner, count, training](Tape& tape, const Array& g) {
    std::vector<double> sum_g(c, 0.0), sum_gh(c, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t off = (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          sum_g[ch] += g[off + i];
          sum_gh[ch] += g[off + i] * (*xhat)[off + i];
        }
      }
    }
    if (tape.requires_grad(gamma)) {
      Array& gg = tape.adjoint(gamma);
      for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += sum_gh[ch];
    }
    if (tape.requires_grad(beta)) {
      Array& gb = tape.adjoint(beta);
      for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += sum_g[ch];
    }
    if (tape.requires_grad(x)) {
      const Array& gm = tape.value(gamma);
      Array& gx = tape.adjoint(x);
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t off = (b * c + ch) * inner;
          const double scale = gm[ch] * (*inv_std)[ch];
          for (std::size_t i = 0; i < inner; ++i) {
            if (training) {
              gx[off + i] += scale / count *
                             (count * g[off + i] - sum_g[ch] - (*xhat)[off + i] * sum_gh[ch]);
            } else {
              gx[off + i] += scale * g[off + i];
            }
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Layout

Var reshape(Tape& t, Var x, Shape shape) {
  const Array& xv = t.value(x);
  if (numel(shape) != xv.size()) shape_fail(Op::kReshape, xv.shape(), shape);
  Array out(shape, xv.storage());
  return t.record(Op::kReshape, {x}, std::move(out), [x](Tape& tape, const Array& g) {
    Array& gx = tape.adjoint(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

namespace {

std::pair<std::size_t, std::size_t> outer_inner(const Shape& s, std::size_t axis) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  return {outer, inner};
}

}  // namespace

Var slice_range(Tape& t, Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Array& xv = t.value(x);
  if (axis >= xv.rank() || begin >= end || end > xv.dim(axis)) {
    shape_fail(Op::kSliceRange, xv.shape(), Shape{axis, begin, end}, "bad axis/range");
  }
  Shape os = xv.shape();
  os[axis] = end - begin;
  const auto [outer, inner] = outer_inner(xv.shape(), axis);
  const std::size_t full = xv.dim(axis);
  const std::size_t len = end - begin;
  Array out(os);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.ptr() + (o * full + begin) * inner, len * inner, out.ptr() + o * len * inner);
  }
  return t.record(Op::kSliceRange, {x}, std::move(out), [x, outer, inner, full, begin, len](Tape& tape, const Array& g) {
    Array& gx = tape.adjoint(x);
    for (std::size_t o = 0; o < outer; ++o) {
      const double* s = g.ptr() + o * len * inner;
      double* d = gx.ptr() + (o * full + begin) * inner;
      for (std::size_t i = 0; i < len * inner; ++i) d[i] += s[i];
    }
  });
}

Var concat(Tape& t, const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = t.value(parts[0]).shape();
  if (axis >= s0.size()) shape_fail(Op::kConcat, s0, s0, "axis out of range");
  Shape os = s0;
  os[axis] = 0;
  std::vector<std::size_t> lens;
  for (Var p : parts) {
    const Shape& s = t.value(p).shape();
    if (s.size() != s0.size()) shape_fail(Op::kConcat, s0, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != s0[i]) shape_fail(Op::kConcat, s0, s);
    }
    lens.push_back(s[axis]);
    os[axis] += s[axis];
  }
  const auto [outer, inner] = outer_inner(s0, axis);
  const std::size_t total = os[axis];
  Array out(os);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Array& pv = t.value(parts[k]);
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.ptr() + o * lens[k] * inner, lens[k] * inner, out.ptr() + (o * total + offset) * inner);
    }
    offset += lens[k];
  }
  return t.record(Op::kConcat, parts, std::move(out), [parts, lens, outer, inner, total](Tape& tape, const Array& g) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (tape.requires_grad(parts[k])) {
        Array& gp = tape.adjoint(parts[k]);
        for (std::size_t o = 0; o < outer; ++o) {
          const double* s = g.ptr() + (o * total + offset) * inner;
          double* d = gp.ptr() + o * lens[k] * inner;
          for (std::size_t i = 0; i < lens[k] * inner; ++i) d[i] += s[i];
        }
      }
      offset += lens[k];
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var reduce_sum(Tape& t, Var x) {
  const Array& xv = t.value(x);
  double s = 0.0;
  for (double v : xv.data()) s += v;
  return t.record(Op::kReduceSum, {x}, scalar_array(s), [x](Tape& tape, const Array& g) {
    Array& gx = tape.adjoint(x);
    for (double& v : gx.data()) v += g[0];
  });
}

Var reduce_mean(Tape& t, Var x) {
  const Array& xv = t.value(x);
  double s = 0.0;
  for (double v : xv.data()) s += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  return t.record(Op::kReduceMean, {x}, scalar_array(s * inv), [x, inv](Tape& tape, const Array& g) {
    Array& gx = tape.adjoint(x);
    for (double& v : gx.data()) v += g[0] * inv;
  });
}

Var abs_sum(Tape& t, Var x) {
  const Array& xv = t.value(x);
  double s = 0.0;
  for (double v : xv.data()) s += std::abs(v);
  return t.record(Op::kAbsSum, {x}, scalar_array(s), [x](Tape& tape, const Array& g) {
    const Array& xv = tape.value(x);
    Array& gx = tape.adjoint(x);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      gx[i] += g[0] * (xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0));
    }
  });
}

Var dot(Tape& t, Var a, Var b) {
  require_same(t, Op::kDot, a, b);
  const Array& av = t.value(a);
  const Array& bv = t.value(b);
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return t.record(Op::kDot, {a, b}, scalar_array(s), [a, b](Tape& tape, const Array& g) {
    if (tape.requires_grad(a)) {
      const Array& bv = tape.value(b);
      Array& ga = tape.adjoint(a);
      for (std::size_t i = 0; i < bv.size(); ++i) ga[i] += g[0] * bv[i];
    }
    if (tape.requires_grad(b)) {
      const Array& av = tape.value(a);
      Array& gb = tape.adjoint(b);
      for (std::size_t i = 0; i < av.size(); ++i) gb[i] += g[0] * av[i];
    }
  });
}

Var l2_norm(Tape& t, Var x) {
  const Array& xv = t.value(x);
  double s = 0.0;
  for (double v : xv.data()) s += v * v;
  const double norm = std::sqrt(s);
  return t.record(Op::kL2Norm, {x}, scalar_array(norm), [x, norm](Tape& tape, const Array& g) {
    if (norm == 0.0) return;
    const Array& xv = tape.value(x);
    Array& gx = tape.adjoint(x);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[0] * xv[i] / norm;
  });
}

// ---------------------------------------------------------------------------
// Spectral

Var complex_cell_mul(Tape& t, Var a, Var b) {
  require_same(t, Op::kComplexCellMul, a, b);
  const Array& av = t.value(a);
  if (av.rank() != 4 || av.dim(1) != 2) {
    shape_fail(Op::kComplexCellMul, av.shape(), t.value(b).shape(), "need (N, 2, T, F)");
  }
  const std::size_t n = av.dim(0);
  const std::size_t plane = av.dim(2) * av.dim(3);
  const Array& bv = t.value(b);
  Array out(av.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t re = s * 2 * plane, im = re + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double ar = av[re + i], ai = av[im + i], br = bv[re + i], bi = bv[im + i];
      out[re + i] = ar * br - ai * bi;
      out[im + i] = ar * bi + ai * br;
    }
  }
  return t.record(Op::kComplexCellMul, {a, b}, std::move(out), [a, b, n, plane](Tape& tape, const Array& g) {
    const Array& av = tape.value(a);
    const Array& bv = tape.value(b);
    const bool need_a = tape.requires_grad(a), need_b = tape.requires_grad(b);
    Array* ga = need_a ? &tape.adjoint(a) : nullptr;
    Array* gb = need_b ? &tape.adjoint(b) : nullptr;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t re = s * 2 * plane, im = re + plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double gr = g[re + i], gi = g[im + i];
        if (ga) {
          (*ga)[re + i] += gr * bv[re + i] + gi * bv[im + i];
          (*ga)[im + i] += -gr * bv[im + i] + gi * bv[re + i];
        }
        if (gb) {
          (*gb)[re + i] += gr * av[re + i] + gi * av[im + i];
          (*gb)[im + i] += -gr * av[im + i] + gi * av[re + i];
        }
      }
    }
  });
}

Var magnitude_compress(Tape& t, Var planes, double power, double eps) {
  const Array& pv = t.value(planes);
  if (pv.rank() != 4 || pv.dim(1) != 2) shape_fail(Op::kMagnitudeCompress, pv.shape(), pv.shape(), "need (N, 2, T, F)");
  const std::size_t n = pv.dim(0);
  const std::size_t plane = pv.dim(2) * pv.dim(3);
  Array out(pv.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t re = s * 2 * plane, im = re + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double scale = std::pow(pv[re + i] * pv[re + i] + pv[im + i] * pv[im + i] + eps, 0.5 * (power - 1.0));
      out[re + i] = pv[re + i] * scale;
      out[im + i] = pv[im + i] * scale;
    }
  }
  return t.record(Op::kMagnitudeCompress, {planes}, std::move(out),
                  [planes, power, eps, n, plane](Tape& tape, const Array& g) {
    const Array& pv = tape.value(planes);
    Array& gp = tape.adjoint(planes);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t re = s * 2 * plane, im = re + plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double a = pv[re + i], b = pv[im + i];
        const double m2 = a * a + b * b + eps;
        const double scale = std::pow(m2, 0.5 * (power - 1.0));
        // d scale / d a = (power - 1) * scale / m2 * a
        const double k = (power - 1.0) * scale / m2;
        const double gr = g[re + i], gi = g[im + i];
        gp[re + i] += gr * (scale + k * a * a) + gi * (k * a * b);
        gp[im + i] += gr * (k * a * b) + gi * (scale + k * b * b);
      }
    }
  });
}

Var istft_op(Tape& t, Var spec, const StftConfig& cfg) {
  const Array& sv = t.value(spec);
  if (sv.rank() != 4 || sv.dim(1) != 2 || sv.dim(3) != cfg.bins() || sv.dim(2) == 0) {
    shape_fail(Op::kIstft, sv.shape(), Shape{0, 2, 0, cfg.bins()}, "need (N, 2, frames, bins)");
  }
  const std::size_t n = sv.dim(0);
  const std::size_t frames = sv.dim(2);
  const std::size_t bins = cfg.bins();
  const std::size_t plane = frames * bins;
  const std::size_t length = cfg.signal_length(frames);
  Array out(Shape{n, length});
  ComplexSpectrogram grid(frames, bins);
  for (std::size_t s = 0; s < n; ++s) {
    const double* re = sv.ptr() + s * 2 * plane;
    const double* im = re + plane;
    for (std::size_t i = 0; i < plane; ++i) grid.data()[i] = Complex(re[i], im[i]);
    AudioBuffer wave = istft(grid, cfg);
    std::copy(wave.samples.begin(), wave.samples.end(), out.ptr() + s * length);
  }
  return t.record(Op::kIstft, {spec}, std::move(out), [spec, cfg, n, frames, plane, length](Tape& tape, const Array& g) {
    Array& gs = tape.adjoint(spec);
    std::vector<double> gre(plane), gim(plane);
    for (std::size_t s = 0; s < n; ++s) {
      istft_adjoint(std::span<const double>(g.ptr() + s * length, length), cfg, frames, gre, gim);
      double* re = gs.ptr() + s * 2 * plane;
      double* im = re + plane;
      for (std::size_t i = 0; i < plane; ++i) {
        re[i] += gre[i];
        im[i] += gim[i];
      }
    }
  });
}

}  // namespace c2f::ag
