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

// Layers built from tape primitives. Each layer holds pointers into the
// ParamSet that created it, so it is only valid while that set lives.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "warbler/nn/params.h"
#include "warbler/nn/tape.h"

namespace warbler::nn {

struct Linear {
  Parameter* w = nullptr;  // in x out
  Parameter* b = nullptr;  // 1 x out

  static Linear Create(ParamSet& ps, const std::string& name, int in, int out, Rng& rng);
  Var Apply(Tape& tape, Var x) const;
};

struct Embedding {
  Parameter* table = nullptr;  // vocab x dim

  static Embedding Create(ParamSet& ps, const std::string& name, int vocab, int dim,
                          Rng& rng);
  Var Apply(Tape& tape, std::span<const int> ids) const;
  int vocab() const { return table->value.rows(); }
};

struct LayerNormLayer {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  static LayerNormLayer Create(ParamSet& ps, const std::string& name, int dim);
  Var Apply(Tape& tape, Var x) const;
};

struct Conv1dLayer {
  Parameter* w = nullptr;  // (kernel * in) x out
  Parameter* b = nullptr;
  int kernel = 1;

  static Conv1dLayer Create(ParamSet& ps, const std::string& name, int in, int out,
                            int kernel, Rng& rng);
  Var Apply(Tape& tape, Var x) const;
};

/// One LSTM direction over precomputed input projections.
/// `gates_in` is T x 4H (input projection plus bias, gate order i, f, g, o);
/// `wh` is H x 4H. Returns T x H hidden states in input time order; with
/// `reverse` the recurrence runs from the last step to the first.
Var LstmRecurrence(Var gates_in, Var wh, bool reverse);

/// Stacked bidirectional LSTM; each layer outputs T x 2H (forward | backward).
class BiLstm {
 public:
  static BiLstm Create(ParamSet& ps, const std::string& name, int in, int hidden,
                       int layers, Rng& rng);
  Var Apply(Tape& tape, Var x) const;
  int hidden() const { return hidden_; }

 private:
  struct Direction {
    Parameter* wx = nullptr;
    Parameter* wh = nullptr;
    Parameter* b = nullptr;
  };
  std::vector<Direction> fwd_, bwd_;
  int hidden_ = 0;
};

/// Transformer block with a convolutional feed-forward sublayer; residual
/// connection and layer normalization after each sublayer.
struct FftBlock {
  Linear q, k, v, o;
  LayerNormLayer ln_attn, ln_ffn;
  Conv1dLayer conv1, conv2;
  int heads = 1;

  static FftBlock Create(ParamSet& ps, const std::string& name, int dim, int heads,
                         int filter, int kernel, Rng& rng);
  Var Apply(Tape& tape, Var x) const;
};

/// Fixed sinusoidal position table, T x dim.
Tensor SinusoidalPositions(int length, int dim);

}  // namespace warbler::nn
