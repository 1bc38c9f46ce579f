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

#include "warbler/nn/layers.h"

#include <cmath>

#include "warbler/error.h"

namespace warbler::nn {

Linear Linear::Create(ParamSet& ps, const std::string& name, int in, int out, Rng& rng) {
  Linear l;
  l.w = &ps.Add(name + "/w", in, out);
  l.b = &ps.Add(name + "/b", 1, out);
  ParamSet::InitUniform(*l.w, in, rng);
  ParamSet::InitUniform(*l.b, in, rng);
  return l;
}

Var Linear::Apply(Tape& tape, Var x) const {
  return Add(MatMul(x, tape.Param(*w)), tape.Param(*b));
}

Embedding Embedding::Create(ParamSet& ps, const std::string& name, int vocab, int dim,
                            Rng& rng) {
  Embedding e;
  e.table = &ps.Add(name + "/table", vocab, dim);
  ParamSet::InitUniform(*e.table, dim, rng);
  return e;
}

Var Embedding::Apply(Tape& tape, std::span<const int> ids) const {
  return EmbeddingLookup(tape.Param(*table), ids);
}

LayerNormLayer LayerNormLayer::Create(ParamSet& ps, const std::string& name, int dim) {
  LayerNormLayer l;
  l.gain = &ps.Add(name + "/gain", 1, dim);
  l.bias = &ps.Add(name + "/bias", 1, dim);
  l.gain->value.Fill(1.0);
  return l;
}

Var LayerNormLayer::Apply(Tape& tape, Var x) const {
  return LayerNorm(x, tape.Param(*gain), tape.Param(*bias));
}

Conv1dLayer Conv1dLayer::Create(ParamSet& ps, const std::string& name, int in, int out,
                                int kernel, Rng& rng) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw Error(ErrorKind::kConfig, "conv kernel size must be odd and positive");
  }
  Conv1dLayer c;
  c.kernel = kernel;
  c.w = &ps.Add(name + "/w", kernel * in, out);
  c.b = &ps.Add(name + "/b", 1, out);
  ParamSet::InitUniform(*c.w, kernel * in, rng);
  ParamSet::InitUniform(*c.b, kernel * in, rng);
  return c;
}

Var Conv1dLayer::Apply(Tape& tape, Var x) const {
  return Add(Conv1d(x, tape.Param(*w), kernel), tape.Param(*b));
}

namespace {

double Sigm(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Var LstmRecurrence(Var gates_in, Var wh, bool reverse) {
  Tape& tape = *gates_in.tape;
  if (wh.tape != &tape) throw Error(ErrorKind::kShape, "lstm: vars from different tapes");
  const Tensor& GX = gates_in.value();
  const Tensor& WH = wh.value();
  const int T = GX.rows();
  const int H = WH.rows();
  if (T == 0) throw Error(ErrorKind::kShape, "lstm: empty sequence");
  if (WH.cols() != 4 * H || GX.cols() != 4 * H) {
    throw Error(ErrorKind::kShape, "lstm: incompatible shapes " + GX.ShapeString() +
                                       " and " + WH.ShapeString());
  }
  // Per-step caches: activated gates (T x 4H) and cell states (T x H).
  Tensor acts(T, 4 * H), cells(T, H), hidden(T, H);
  std::vector<double> h_prev(H, 0.0), c_prev(H, 0.0), a(4 * H);
  for (int s = 0; s < T; ++s) {
    const int t = reverse ? T - 1 - s : s;
    const double* gx = GX.row(t);
    for (int j = 0; j < 4 * H; ++j) a[j] = gx[j];
    for (int p = 0; p < H; ++p) {
      const double hv = h_prev[p];
      if (hv == 0.0) continue;
      const double* w = WH.row(p);
      for (int j = 0; j < 4 * H; ++j) a[j] += hv * w[j];
    }
    double* act = acts.row(t);
    for (int j = 0; j < H; ++j) {
      act[j] = Sigm(a[j]);
      act[H + j] = Sigm(a[H + j]);
      act[2 * H + j] = std::tanh(a[2 * H + j]);
      act[3 * H + j] = Sigm(a[3 * H + j]);
      const double c = act[H + j] * c_prev[j] + act[j] * act[2 * H + j];
      cells(t, j) = c;
      hidden(t, j) = act[3 * H + j] * std::tanh(c);
    }
    for (int j = 0; j < H; ++j) {
      c_prev[j] = cells(t, j);
      h_prev[j] = hidden(t, j);
    }
  }
  const int ig = gates_in.id, iw = wh.id;
  const bool need = tape.requires_grad(ig) || tape.requires_grad(iw);
  return tape.Record(
      std::move(hidden), need,
      [ig, iw, reverse, T, H, acts = std::move(acts), cells = std::move(cells)](Tape& tp,
                                                                                int self) {
        const Tensor& G = tp.grad(self);
        const Tensor& Hs = tp.value(self);
        const Tensor& WH = tp.value(iw);
        Tensor* GG = tp.requires_grad(ig) ? &tp.GradRef(ig) : nullptr;
        Tensor* GW = tp.requires_grad(iw) ? &tp.GradRef(iw) : nullptr;
        std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), da(4 * H);
        for (int s = T - 1; s >= 0; --s) {
          const int t = reverse ? T - 1 - s : s;
          const int tp_prev = s == 0 ? -1 : (reverse ? t + 1 : t - 1);
          const double* act = acts.row(t);
          for (int j = 0; j < H; ++j) {
            const double i = act[j], f = act[H + j], g = act[2 * H + j], o = act[3 * H + j];
            const double c = cells(t, j);
            const double tc = std::tanh(c);
            const double c_prev = tp_prev < 0 ? 0.0 : cells(tp_prev, j);
            const double dh = G(t, j) + dh_next[j];
            const double dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            da[j] = dc * g * i * (1.0 - i);
            da[H + j] = dc * c_prev * f * (1.0 - f);
            da[2 * H + j] = dc * i * (1.0 - g * g);
            da[3 * H + j] = dh * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
          }
          if (GG) {
            double* gg = GG->row(t);
            for (int j = 0; j < 4 * H; ++j) gg[j] += da[j];
          }
          if (tp_prev >= 0) {
            const double* hp = Hs.row(tp_prev);
            if (GW) {
              for (int p = 0; p < H; ++p) {
                double* gw = GW->row(p);
                const double hv = hp[p];
                for (int j = 0; j < 4 * H; ++j) gw[j] += hv * da[j];
              }
            }
            for (int p = 0; p < H; ++p) {
              const double* w = WH.row(p);
              double sum = 0.0;
              for (int j = 0; j < 4 * H; ++j) sum += w[j] * da[j];
              dh_next[p] = sum;
            }
          }
        }
      });
}

BiLstm BiLstm::Create(ParamSet& ps, const std::string& name, int in, int hidden,
                      int layers, Rng& rng) {
  if (in <= 0 || hidden <= 0 || layers <= 0) {
    throw Error(ErrorKind::kConfig, "bilstm dims must be positive");
  }
  BiLstm net;
  net.hidden_ = hidden;
  int layer_in = in;
  for (int l = 0; l < layers; ++l) {
    for (int d = 0; d < 2; ++d) {
      const std::string prefix =
          name + "/l" + std::to_string(l) + (d == 0 ? "/fwd" : "/bwd");
      Direction dir;
      dir.wx = &ps.Add(prefix + "/wx", layer_in, 4 * hidden);
      dir.wh = &ps.Add(prefix + "/wh", hidden, 4 * hidden);
      dir.b = &ps.Add(prefix + "/b", 1, 4 * hidden);
      ParamSet::InitUniform(*dir.wx, hidden, rng);
      ParamSet::InitUniform(*dir.wh, hidden, rng);
      ParamSet::InitUniform(*dir.b, hidden, rng);
      for (int j = hidden; j < 2 * hidden; ++j) dir.b->value[j] = 1.0;  // forget gate
      (d == 0 ? net.fwd_ : net.bwd_).push_back(dir);
    }
    layer_in = 2 * hidden;
  }
  return net;
}

Var BiLstm::Apply(Tape& tape, Var x) const {
  Var h = x;
  for (std::size_t l = 0; l < fwd_.size(); ++l) {
    Var outs[2];
    for (int d = 0; d < 2; ++d) {
      const Direction& dir = d == 0 ? fwd_[l] : bwd_[l];
      Var gates = Add(MatMul(h, tape.Param(*dir.wx)), tape.Param(*dir.b));
      outs[d] = LstmRecurrence(gates, tape.Param(*dir.wh), d == 1);
    }
    h = ConcatCols(outs);
  }
  return h;
}

FftBlock FftBlock::Create(ParamSet& ps, const std::string& name, int dim, int heads,
                          int filter, int kernel, Rng& rng) {
  if (heads < 1 || dim % heads != 0) {
    throw Error(ErrorKind::kConfig, "model dim must be divisible by the head count");
  }
  FftBlock b;
  b.heads = heads;
  b.q = Linear::Create(ps, name + "/q", dim, dim, rng);
  b.k = Linear::Create(ps, name + "/k", dim, dim, rng);
  b.v = Linear::Create(ps, name + "/v", dim, dim, rng);
  b.o = Linear::Create(ps, name + "/o", dim, dim, rng);
  b.ln_attn = LayerNormLayer::Create(ps, name + "/ln_attn", dim);
  b.conv1 = Conv1dLayer::Create(ps, name + "/conv1", dim, filter, kernel, rng);
  b.conv2 = Conv1dLayer::Create(ps, name + "/conv2", filter, dim, kernel, rng);
  b.ln_ffn = LayerNormLayer::Create(ps, name + "/ln_ffn", dim);
  return b;
}

Var FftBlock::Apply(Tape& tape, Var x) const {
  Var attn = ScaledDotAttention(q.Apply(tape, x), k.Apply(tape, x), v.Apply(tape, x), heads);
  Var x1 = ln_attn.Apply(tape, Add(x, o.Apply(tape, attn)));
  Var ffn = conv2.Apply(tape, Relu(conv1.Apply(tape, x1)));
  return ln_ffn.Apply(tape, Add(x1, ffn));
}

Tensor SinusoidalPositions(int length, int dim) {
  Tensor pe(length, dim);
  for (int t = 0; t < length; ++t) {
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(t, i) = i % 2 == 0 ? std::sin(t * rate) : std::cos(t * rate);
    }
  }
  return pe;
}

}  // namespace warbler::nn
