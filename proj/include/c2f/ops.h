// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

#include "c2f/spectral.h"
#include "c2f/tape.h"

// Node constructors. Each appends exactly one node to the tape and throws
// ShapeError (naming the op and both shapes) on incompatible inputs.
namespace c2f::ag {

// Elementwise, identical shapes.
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scalar_mul(Tape& t, Var a, double k);
Var add_scalar(Tape& t, Var a, double k);
Var leaky_relu(Tape& t, Var x, double slope);
Var tanh(Tape& t, Var x);
Var sqrt(Tape& t, Var x);
Var square(Tape& t, Var x);

// (M, K) x (K, N) -> (M, N)
Var matmul(Tape& t, Var a, Var b);
// x: (N, D), w: (O, D), b: (O) -> (N, O)
Var linear(Tape& t, Var x, Var w, Var b);

// Explicit symmetric zero padding; no implicit "same" mode.
struct Conv2dGeometry {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

// x: (N, C, H, W), w: (O, C, kh, kw), optional bias (O).
// Output (N, O, (H + 2ph - kh)/sh + 1, (W + 2pw - kw)/sw + 1).
Var conv2d(Tape& t, Var x, Var w, Var bias, const Conv2dGeometry& g);
Var conv2d(Tape& t, Var x, Var w, const Conv2dGeometry& g);

// Transposed convolution. x: (N, Cin, H, W), w: (Cin, Cout, kh, kw).
// Output (N, Cout, (H - 1)sh - 2ph + kh, (W - 1)sw - 2pw + kw); with equal
// geometry and no bias it is the adjoint of conv2d.
Var deconv2d(Tape& t, Var x, Var w, Var bias, const Conv2dGeometry& g);
Var deconv2d(Tape& t, Var x, Var w, const Conv2dGeometry& g);

struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased batch variance
};

struct BatchNormOptions {
  double eps = 1e-5;
  bool training = true;
  // Inference mode normalizes with these (one value per channel).
  const std::vector<double>* running_mean = nullptr;
  const std::vector<double>* running_var = nullptr;
  // Training mode reports the batch statistics here when non-null.
  BatchNormStats* stats_out = nullptr;
};

// Per-channel normalization of (N, C, H, W) followed by gamma/beta (C).
Var batch_norm(Tape& t, Var x, Var gamma, Var beta, const BatchNormOptions& options);

Var reshape(Tape& t, Var x, Shape shape);
// Keeps indices [begin, end) along `axis`.
Var slice_range(Tape& t, Var x, std::size_t axis, std::size_t begin, std::size_t end);
Var concat(Tape& t, const std::vector<Var>& parts, std::size_t axis);

// Scalar-valued reductions
Var reduce_sum(Tape& t, Var x);
Var reduce_mean(Tape& t, Var x);
Var abs_sum(Tape& t, Var x);
Var dot(Tape& t, Var a, Var b);
Var l2_norm(Tape& t, Var x);

// Interleaved complex planes: shape (N, 2, T, F), channel 0 = re, 1 = im.
Var complex_cell_mul(Tape& t, Var a, Var b);

// Per-cell magnitude compression of (N, 2, T, F) planes:
// (re, im) * (re^2 + im^2 + eps)^((power - 1) / 2).
Var magnitude_compress(Tape& t, Var planes, double power, double eps = 1e-8);

// Fixed linear inverse STFT: (N, 2, frames, bins) -> (N, samples).
Var istft_op(Tape& t, Var spec, const StftConfig& cfg);

}  // namespace c2f::ag
