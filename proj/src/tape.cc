// Copyright 2026 The c2f-enhance Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "c2f/tape.h"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "c2f/errors.h"

namespace c2f::ag {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != numel(shape_)) {
    throw ShapeError(fmt::format("array data length {} does not match shape {}", data_.size(),
                                 shape_str(shape_)));
  }
}

double Array::item() const {
  if (data_.size() != 1) throw ShapeError("item() on array of shape " + shape_str(shape_));
  return data_[0];
}

void Array::reshape(Shape shape) {
  if (numel(shape) != data_.size()) {
    throw ShapeError(fmt::format("cannot reshape {} to {}", shape_str(shape_), shape_str(shape)));
  }
  shape_ = std::move(shape);
}

bool Array::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScalarMul: return "scalar_mul";
    case Op::kAddScalar: return "add_scalar";
    case Op::kMatmul: return "matmul";
    case Op::kLinear: return "linear";
    case Op::kConv2d: return "conv2d";
    case Op::kDeconv2d: return "deconv2d";
    case Op::kBatchNorm: return "batch_norm";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kTanh: return "tanh";
    case Op::kReshape: return "reshape";
    case Op::kSliceRange: return "slice_range";
    case Op::kConcat: return "concat";
    case Op::kReduceSum: return "reduce_sum";
    case Op::kReduceMean: return "reduce_mean";
    case Op::kSqrt: return "sqrt";
    case Op::kSquare: return "square";
    case Op::kAbsSum: return "abs_sum";
    case Op::kComplexCellMul: return "complex_cell_mul";
    case Op::kIstft: return "istft_op";
    case Op::kDot: return "dot";
    case Op::kL2Norm: return "l2_norm";
    case Op::kGranularCosine: return "granular_cosine";
    case Op::kMeanLogSigmoid: return "mean_log_sigmoid";
    case Op::kMagnitudeCompress: return "magnitude_compress";
  }
  return "unknown";
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ShapeError(fmt::format("invalid node id {}", v.id));
  return nodes_[v.id];
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw ShapeError(fmt::format("invalid node id {}", v.id));
  return nodes_[v.id];
}

Var Tape::constant(Array value) {
  nodes_.push_back(Node{Op::kConstant, {}, std::move(value), {}, false, false, {}});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(std::string key, Array value) {
  if (parameters_.count(key)) throw ShapeError(fmt::format("parameter '{}' bound twice", key));
  nodes_.push_back(Node{Op::kParameter, {}, std::move(value), {}, false, true, {}});
  Var v{nodes_.size() - 1};
  parameters_.emplace(std::move(key), v);
  return v;
}

Var Tape::record(Op op, std::vector<Var> inputs, Array value, BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) {
    if (in.id >= nodes_.size()) throw ShapeError(fmt::format("{}: invalid input id", op_name(op)));
    needs = needs || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), {}, false, needs,
                        needs ? std::move(backward) : BackwardFn{}});
  return Var{nodes_.size() - 1};
}

bool Tape::any_requires_grad(std::initializer_list<Var> vars) const {
  for (Var v : vars) {
    if (v.valid() && node(v).requires_grad) return true;
  }
  return false;
}

Array& Tape::adjoint(Var v) {
  Node& n = node(v);
  if (!n.has_grad) {
    n.grad = Array(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

Array Tape::adjoint_or_zero(Var v) const {
  const Node& n = node(v);
  return n.has_grad ? n.grad : Array(n.value.shape(), 0.0);
}

std::string Tape::trace() const {
  std::string out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    std::string ins;
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      if (k) ins += ",";
      ins += std::to_string(n.inputs[k].id);
    }
    out += fmt::format("{} {} [{}] {}\n", i, op_name(n.op), ins, shape_str(n.value.shape()));
  }
  return out;
}

void Tape::run_backward(Var loss) {
  Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss node must be scalar, got " + shape_str(root.value.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Array();
  }
  adjoint(loss)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    const Array& g = n.grad;
    n.backward(*this, g);
  }
}

GradientMap backward(Tape& tape, Var loss) {
  tape.run_backward(loss);
  GradientMap grads;
  for (const auto& [key, var] : tape.parameters()) grads.emplace(key, tape.adjoint_or_zero(var));
  return grads;
}

}  // namespace c2f::ag
