// Copyright 2026 The Warbler Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode differentiation over a linear tape of matrix operations.
//
// A Tape records every operation applied to its Vars. Backward() walks the
// tape once in reverse and accumulates gradients; gradients of parameter
// leaves go straight into Parameter::grad. A tape is single-owner and is
// discarded after one forward/backward pass.

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "warbler/nn/tensor.h"

namespace warbler::nn {

struct Parameter;
class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Tensor value);
  /// Leaf bound to a parameter: reads its value, accumulates into its grad.
  Var Param(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1 x 1.
  void Backward(Var loss);

  const Tensor& value(int id) const;
  /// Gradient of a node after Backward(); empty if no gradient reached it.
  const Tensor& grad(int id) const;
  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  using BackwardFn = std::function<void(Tape&, int self)>;
  Var Record(Tensor value, bool requires_grad, BackwardFn backward);
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient accumulator for `id`, zero-initialized on first use.
  Tensor& GradRef(int id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Primitive operations. All tensors are matrices; "row broadcast" means a
// 1 x C operand is applied to every row of an R x C operand.

Var MatMul(Var a, Var b);
Var Transpose(Var a);
/// a + b, same shape or b row-broadcast.
Var Add(Var a, Var b);
/// a - b, same shape or b row-broadcast.
Var Sub(Var a, Var b);
/// Elementwise a * b, same shape or b row-broadcast.
Var Mul(Var a, Var b);
Var Scale(Var a, double factor);
Var Tanh(Var a);
Var Sigmoid(Var a);
Var Relu(Var a);
Var Abs(Var a);
Var Exp(Var a);
Var Sum(Var a);
Var Mean(Var a);
/// Column-wise mean over rows: R x C -> 1 x C.
Var MeanRows(Var a);
Var ConcatCols(std::span<const Var> parts);
Var ConcatRows(std::span<const Var> parts);
Var SliceRows(Var a, int begin, int end);
Var SliceCols(Var a, int begin, int end);
/// out[i] = a[ids[i]]; embedding lookup and length regulation.
Var GatherRows(Var a, std::span<const int> ids);
Var EmbeddingLookup(Var table, std::span<const int> ids);
/// Row-wise softmax.
Var SoftmaxRows(Var a);
/// Row-wise normalization with 1 x C gain and bias.
Var LayerNorm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Same-padded 1-D convolution over time. `x` is T x Cin; `kernel` is
/// (K * Cin) x Cout with row index k * Cin + ci.
Var Conv1d(Var x, Var kernel, int kernel_size);
/// Mean softmax cross-entropy of each logits row against its label.
Var SoftmaxCrossEntropy(Var logits, std::span<const int> labels);
/// Identity forward; multiplies the incoming gradient by -lambda.
Var GradientReverse(Var x, double lambda);
/// Multi-head scaled dot-product attention over T x D inputs.
Var ScaledDotAttention(Var q, Var k, Var v, int heads);

}  // namespace warbler::nn
