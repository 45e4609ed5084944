// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "c2f/array.h"

namespace c2f::ag {

// Analytic gradient of a random projection <op(inputs), r> against central
// differences. Elements whose gradient magnitude is below `abs_floor` are
// compared absolutely, the rest relatively.
struct GradCheckOptions {
  double step = 1e-5;
  double abs_floor = 1e-6;
};

struct GradCheckResult {
  std::string op;
  std::uint64_t seed = 0;
  std::size_t elements = 0;     // input elements perturbed
  double max_rel_error = 0.0;   // over elements with |grad| >= abs_floor
  double max_abs_error = 0.0;   // over elements with |grad| < abs_floor
  double threshold = 1e-4;      // relative threshold for this op
  double abs_threshold = 1e-8;

  bool passed() const { return max_rel_error < threshold && max_abs_error < abs_threshold; }
};

// Names accepted by grad_check: every engine op, the loss nodes and
// "generator" (end-to-end cosine loss w.r.t. the first encoder kernel).
std::vector<std::string> grad_check_ops();

// Empty `input_shapes` uses the op's default instance. Throws ConfigError for
// unknown ops and ShapeError for shapes the op rejects.
GradCheckResult grad_check(const std::string& op, std::uint64_t seed,
                           const std::vector<Shape>& input_shapes = {},
                           const GradCheckOptions& options = {});

}  // namespace c2f::ag
