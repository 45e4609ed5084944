// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "c2f/array.h"

namespace c2f::ag {

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,
  kScalarMul,
  kAddScalar,
  kMatmul,
  kLinear,
  kConv2d,
  kDeconv2d,
  kBatchNorm,
  kLeakyRelu,
  kTanh,
  kReshape,
  kSliceRange,
  kConcat,
  kReduceSum,
  kReduceMean,
  kSqrt,
  kSquare,
  kAbsSum,
  kComplexCellMul,
  kIstft,
  kDot,
  kL2Norm,
  kGranularCosine,
  kMeanLogSigmoid,
  kMagnitudeCompress,
};

std::string_view op_name(Op op);

// Handle to a node on a tape.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

class Tape;

// Receives d(loss)/d(this node) and accumulates into the inputs' adjoints.
using BackwardFn = std::function<void(Tape& tape, const Array& out_grad)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Array value);
  // Registers a trainable leaf; `key` names it in the gradient map.
  Var parameter(std::string key, Array value);

  // Appends an op node. `backward` may be empty when no input needs a gradient.
  Var record(Op op, std::vector<Var> inputs, Array value, BackwardFn backward);

  const Array& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  Op op(Var v) const { return node(v).op; }
  std::size_t size() const { return nodes_.size(); }
  bool any_requires_grad(std::initializer_list<Var> vars) const;

  // Adjoint storage of `v`, zero-initialized on first access.
  Array& adjoint(Var v);
  // Adjoint after backward; zeros for nodes the loss does not reach.
  Array adjoint_or_zero(Var v) const;

  const std::map<std::string, Var>& parameters() const { return parameters_; }

  // One "id op [inputs] shape" line per node.
  std::string trace() const;

  void run_backward(Var loss);

 private:
  struct Node {
    Op op;
    std::vector<Var> inputs;
    Array value;
    Array grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  std::map<std::string, Var> parameters_;
};

using GradientMap = std::map<std::string, Array>;

// Reverse sweep from a scalar loss. The map has one entry per registered
// parameter (zeros where the loss does not depend on it).
GradientMap backward(Tape& tape, Var loss);

}  // namespace c2f::ag
