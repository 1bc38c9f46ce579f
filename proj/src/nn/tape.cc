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

#include "warbler/nn/tape.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "warbler/error.h"
#include "warbler/nn/params.h"

namespace warbler::nn {

Tensor::Tensor(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols) {
    throw Error(ErrorKind::kShape, "tensor value count " +
                                       std::to_string(data_.size()) +
                                       " does not match shape " + ShapeString());
  }
}

double Tensor::item() const {
  if (size() != 1) {
    throw Error(ErrorKind::kShape, "item() on tensor of shape " + ShapeString());
  }
  return data_[0];
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::ShapeString() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::Record(Tensor value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::Constant(Tensor value) { return Record(std::move(value), false, nullptr); }

Var Tape::Param(Parameter& p) {
  Node node;
  node.param = &p;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  if (!p.grad.SameShape(p.value)) p.grad = Tensor(p.value.rows(), p.value.cols());
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.param ? n.param->value : n.value;
}

const Tensor& Tape::grad(int id) const {
  const Node& n = nodes_[id];
  return n.param ? n.param->grad : n.grad;
}

Tensor& Tape::GradRef(int id) {
  Node& n = nodes_[id];
  if (n.param) return n.param->grad;
  if (n.grad.empty()) {
    const Tensor& v = n.value;
    n.grad = Tensor(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::Backward(Var loss) {
  if (loss.tape != this) throw Error(ErrorKind::kShape, "backward: foreign var");
  const Tensor& v = value(loss.id);
  if (v.size() != 1) {
    throw Error(ErrorKind::kShape, "backward: loss must be 1x1, got " + v.ShapeString());
  }
  if (!nodes_[loss.id].requires_grad) return;
  GradRef(loss.id)[0] += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.backward || n.param) continue;
    if (n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

namespace {

Tape* SameTape(std::initializer_list<Var> vars, const char* op) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (!v.tape) throw Error(ErrorKind::kShape, std::string(op) + ": null var");
    if (t && v.tape != t) {
      throw Error(ErrorKind::kShape, std::string(op) + ": vars from different tapes");
    }
    t = v.tape;
  }
  return t;
}

[[noreturn]] void ShapeError(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorKind::kShape, std::string(op) + ": incompatible shapes " +
                                     a.ShapeString() + " and " + b.ShapeString());
}

bool AnyGrad(Tape& t, std::initializer_list<Var> vars) {
  for (const Var& v : vars) {
    if (t.requires_grad(v.id)) return true;
  }
  return false;
}

enum class Bcast { kSame, kRow };

Bcast CheckBroadcast(const char* op, const Tensor& a, const Tensor& b) {
  if (a.SameShape(b)) return Bcast::kSame;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::kRow;
  ShapeError(op, a, b);
}

// Elementwise unary op given f(x) and df/dx expressed through (x, y).
template <typename F, typename D>
Var Unary(Var a, F f, D df) {
  Tape& t = *a.tape;
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const int ia = a.id;
  return t.Record(std::move(y), t.requires_grad(ia), [ia, df](Tape& tp, int self) {
    const Tensor& x = tp.value(ia);
    const Tensor& y = tp.value(self);
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.GradRef(ia);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
}

}  // namespace

Var MatMul(Var a, Var b) {
  Tape& t = *SameTape({a, b}, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) ShapeError("matmul", A, B);
  const int n = A.rows(), k = A.cols(), m = B.cols();
  Tensor C(n, m);
  for (int i = 0; i < n; ++i) {
    double* c = C.row(i);
    const double* arow = A.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = B.row(p);
      for (int j = 0; j < m; ++j) c[j] += av * brow[j];
    }
  }
  const int ia = a.id, ib = b.id;
  return t.Record(std::move(C), AnyGrad(t, {a, b}), [ia, ib, n, k, m](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Tensor& GA = tp.GradRef(ia);  // G B^T
      for (int i = 0; i < n; ++i) {
        const double* g = G.row(i);
        double* ga = GA.row(i);
        for (int p = 0; p < k; ++p) {
          const double* brow = B.row(p);
          double s = 0.0;
          for (int j = 0; j < m; ++j) s += g[j] * brow[j];
          ga[p] += s;
        }
      }
    }
    if (tp.requires_grad(ib)) {
      Tensor& GB = tp.GradRef(ib);  // A^T G
      for (int i = 0; i < n; ++i) {
        const double* g = G.row(i);
        const double* arow = A.row(i);
        for (int p = 0; p < k; ++p) {
          const double av = arow[p];
          if (av == 0.0) continue;
          double* gb = GB.row(p);
          for (int j = 0; j < m; ++j) gb[j] += av * g[j];
        }
      }
    }
  });
}

Var Transpose(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  Tensor T(A.cols(), A.rows());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) T(j, i) = A(i, j);
  const int ia = a.id;
  return t.Record(std::move(T), t.requires_grad(ia), [ia](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.GradRef(ia);
    for (int i = 0; i < GA.rows(); ++i)
      for (int j = 0; j < GA.cols(); ++j) GA(i, j) += G(j, i);
  });
}

namespace {

template <int kSign>
Var AddSub(Var a, Var b, const char* op) {
  Tape& t = *SameTape({a, b}, op);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Bcast mode = CheckBroadcast(op, A, B);
  Tensor C = A;
  const int cols = A.cols();
  for (int i = 0; i < A.rows(); ++i) {
    double* c = C.row(i);
    const double* brow = mode == Bcast::kSame ? B.row(i) : B.row(0);
    for (int j = 0; j < cols; ++j) c[j] += kSign * brow[j];
  }
  const int ia = a.id, ib = b.id;
  return t.Record(std::move(C), AnyGrad(t, {a, b}), [ia, ib, mode](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Tensor& GA = tp.GradRef(ia);
      for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
    }
    if (tp.requires_grad(ib)) {
      Tensor& GB = tp.GradRef(ib);
      if (mode == Bcast::kSame) {
        for (std::size_t i = 0; i < G.size(); ++i) GB[i] += kSign * G[i];
      } else {
        for (int i = 0; i < G.rows(); ++i) {
          const double* g = G.row(i);
          for (int j = 0; j < G.cols(); ++j) GB[j] += kSign * g[j];
        }
      }
    }
  });
}

}  // namespace

Var Add(Var a, Var b) { return AddSub<1>(a, b, "add"); }
Var Sub(Var a, Var b) { return AddSub<-1>(a, b, "sub"); }

Var Mul(Var a, Var b) {
  Tape& t = *SameTape({a, b}, "mul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Bcast mode = CheckBroadcast("mul", A, B);
  Tensor C = A;
  for (int i = 0; i < A.rows(); ++i) {
    double* c = C.row(i);
    const double* brow = mode == Bcast::kSame ? B.row(i) : B.row(0);
    for (int j = 0; j < A.cols(); ++j) c[j] *= brow[j];
  }
  const int ia = a.id, ib = b.id;
  return t.Record(std::move(C), AnyGrad(t, {a, b}), [ia, ib, mode](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    const bool need_a = tp.requires_grad(ia), need_b = tp.requires_grad(ib);
    Tensor* GA = need_a ? &tp.GradRef(ia) : nullptr;
    Tensor* GB = need_b ? &tp.GradRef(ib) : nullptr;
    for (int i = 0; i < G.rows(); ++i) {
      const double* g = G.row(i);
      const double* arow = A.row(i);
      const int brow_index = mode == Bcast::kSame ? i : 0;
      const double* brow = B.row(brow_index);
      for (int j = 0; j < G.cols(); ++j) {
        if (GA) GA->row(i)[j] += g[j] * brow[j];
        if (GB) GB->row(brow_index)[j] += g[j] * arow[j];
      }
    }
  });
}

Var Scale(Var a, double factor) {
  return Unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var Tanh(Var a) {
  return Unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Sigmoid(Var a) {
  return Unary(
      a,
      [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Relu(Var a) {
  return Unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Abs(Var a) {
  return Unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var Exp(Var a) {
  return Unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var Sum(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  double s = 0.0;
  for (double v : A.values()) s += v;
  const int ia = a.id;
  return t.Record(Tensor::Scalar(s), t.requires_grad(ia), [ia](Tape& tp, int self) {
    double g = tp.grad(self)[0];
    Tensor& GA = tp.GradRef(ia);
    for (std::size_t i = 0; i < GA.size(); ++i) GA[i] += g;
  });
}

Var Mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw Error(ErrorKind::kShape, "mean of empty tensor");
  return Scale(Sum(a), 1.0 / static_cast<double>(n));
}

Var MeanRows(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (A.rows() == 0) throw Error(ErrorKind::kShape, "mean_rows of empty tensor");
  Tensor M(1, A.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) M[j] += A(i, j);
  for (int j = 0; j < A.cols(); ++j) M[j] /= A.rows();
  const int ia = a.id;
  return t.Record(std::move(M), t.requires_grad(ia), [ia](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.GradRef(ia);
    const double inv = 1.0 / GA.rows();
    for (int i = 0; i < GA.rows(); ++i)
      for (int j = 0; j < GA.cols(); ++j) GA(i, j) += G[j] * inv;
  });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::kShape, "concat_cols: no inputs");
  Tape& t = *parts[0].tape;
  const int rows = parts[0].rows();
  int cols = 0;
  bool need = false;
  std::vector<int> ids, offsets;
  for (const Var& p : parts) {
    if (p.tape != &t) throw Error(ErrorKind::kShape, "concat_cols: mixed tapes");
    if (p.rows() != rows) ShapeError("concat_cols", parts[0].value(), p.value());
    ids.push_back(p.id);
    offsets.push_back(cols);
    cols += p.cols();
    need = need || t.requires_grad(p.id);
  }
  Tensor C(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    for (int i = 0; i < rows; ++i)
      std::copy(P.row(i), P.row(i) + P.cols(), C.row(i) + offsets[k]);
  }
  return t.Record(std::move(C), need, [ids, offsets](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor& GP = tp.GradRef(ids[k]);
      for (int i = 0; i < GP.rows(); ++i)
        for (int j = 0; j < GP.cols(); ++j) GP(i, j) += G(i, offsets[k] + j);
    }
  });
}

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::kShape, "concat_rows: no inputs");
  Tape& t = *parts[0].tape;
  const int cols = parts[0].cols();
  int rows = 0;
  bool need = false;
  std::vector<int> ids, offsets;
  for (const Var& p : parts) {
    if (p.tape != &t) throw Error(ErrorKind::kShape, "concat_rows: mixed tapes");
    if (p.cols() != cols) ShapeError("concat_rows", parts[0].value(), p.value());
    ids.push_back(p.id);
    offsets.push_back(rows);
    rows += p.rows();
    need = need || t.requires_grad(p.id);
  }
  Tensor C(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    std::copy(P.data(), P.data() + P.size(), C.row(offsets[k]));
  }
  return t.Record(std::move(C), need, [ids, offsets](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor& GP = tp.GradRef(ids[k]);
      const double* g = G.row(offsets[k]);
      for (std::size_t i = 0; i < GP.size(); ++i) GP[i] += g[i];
    }
  });
}

Var SliceRows(Var a, int begin, int end) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (begin < 0 || end > A.rows() || begin >= end) {
    throw Error(ErrorKind::kShape, "slice_rows: [" + std::to_string(begin) + ", " +
                                       std::to_string(end) + ") out of " +
                                       A.ShapeString());
  }
  Tensor S(end - begin, A.cols());
  std::copy(A.row(begin), A.row(begin) + S.size(), S.data());
  const int ia = a.id;
  return t.Record(std::move(S), t.requires_grad(ia), [ia, begin](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    double* ga = tp.GradRef(ia).row(begin);
    for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i];
  });
}

Var SliceCols(Var a, int begin, int end) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (begin < 0 || end > A.cols() || begin >= end) {
    throw Error(ErrorKind::kShape, "slice_cols: [" + std::to_string(begin) + ", " +
                                       std::to_string(end) + ") out of " +
                                       A.ShapeString());
  }
  const int w = end - begin;
  Tensor S(A.rows(), w);
  for (int i = 0; i < A.rows(); ++i) std::copy(A.row(i) + begin, A.row(i) + end, S.row(i));
  const int ia = a.id;
  return t.Record(std::move(S), t.requires_grad(ia), [ia, begin, w](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.GradRef(ia);
    for (int i = 0; i < G.rows(); ++i) {
      double* ga = GA.row(i) + begin;
      const double* g = G.row(i);
      for (int j = 0; j < w; ++j) ga[j] += g[j];
    }
  });
}

Var GatherRows(Var a, std::span<const int> ids_in) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (ids_in.empty()) throw Error(ErrorKind::kShape, "gather_rows: no indices");
  std::vector<int> ids(ids_in.begin(), ids_in.end());
  Tensor G(static_cast<int>(ids.size()), A.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= A.rows()) {
      throw Error(ErrorKind::kValidation, "gather_rows: index " + std::to_string(ids[i]) +
                                              " out of range for " + A.ShapeString());
    }
    std::copy(A.row(ids[i]), A.row(ids[i]) + A.cols(), G.row(static_cast<int>(i)));
  }
  const int ia = a.id;
  return t.Record(std::move(G), t.requires_grad(ia), [ia, ids](Tape& tp, int self) {
    const Tensor& Gout = tp.grad(self);
    Tensor& GA = tp.GradRef(ia);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double* g = Gout.row(static_cast<int>(i));
      double* ga = GA.row(ids[i]);
      for (int j = 0; j < GA.cols(); ++j) ga[j] += g[j];
    }
  });
}

Var EmbeddingLookup(Var table, std::span<const int> ids) { return GatherRows(table, ids); }

Var SoftmaxRows(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  Tensor Y(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i) {
    const double* x = A.row(i);
    double* y = Y.row(i);
    double mx = *std::max_element(x, x + A.cols());
    double s = 0.0;
    for (int j = 0; j < A.cols(); ++j) s += (y[j] = std::exp(x[j] - mx));
    for (int j = 0; j < A.cols(); ++j) y[j] /= s;
  }
  const int ia = a.id;
  return t.Record(std::move(Y), t.requires_grad(ia), [ia](Tape& tp, int self) {
    const Tensor& Y = tp.value(self);
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.GradRef(ia);
    for (int i = 0; i < Y.rows(); ++i) {
      const double* y = Y.row(i);
      const double* g = G.row(i);
      double dot = 0.0;
      for (int j = 0; j < Y.cols(); ++j) dot += g[j] * y[j];
      double* ga = GA.row(i);
      for (int j = 0; j < Y.cols(); ++j) ga[j] += y[j] * (g[j] - dot);
    }
  });
}

Var LayerNorm(Var x, Var gain, Var bias, double eps) {
  Tape& t = *SameTape({x, gain, bias}, "layer_norm");
  const Tensor& X = x.value();
  const int rows = X.rows(), cols = X.cols();
  if (gain.rows() != 1 || gain.cols() != cols) ShapeError("layer_norm", X, gain.value());
  if (bias.rows() != 1 || bias.cols() != cols) ShapeError("layer_norm", X, bias.value());
  const Tensor& Gn = gain.value();
  const Tensor& Bs = bias.value();
  Tensor xhat(rows, cols);
  std::vector<double> inv_std(rows);
  Tensor Y(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const double* xr = X.row(i);
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += xr[j];
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= cols;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < cols; ++j) {
      xhat(i, j) = (xr[j] - mean) * inv_std[i];
      Y(i, j) = xhat(i, j) * Gn[j] + Bs[j];
    }
  }
  const int ix = x.id, ig = gain.id, ib = bias.id;
  return t.Record(
      std::move(Y), AnyGrad(t, {x, gain, bias}),
      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp, int self) {
        const Tensor& G = tp.grad(self);
        const Tensor& Gn = tp.value(ig);
        const int rows = G.rows(), cols = G.cols();
        if (tp.requires_grad(ig)) {
          Tensor& GG = tp.GradRef(ig);
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) GG[j] += G(i, j) * xhat(i, j);
        }
        if (tp.requires_grad(ib)) {
          Tensor& GB = tp.GradRef(ib);
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) GB[j] += G(i, j);
        }
        if (tp.requires_grad(ix)) {
          Tensor& GX = tp.GradRef(ix);
          std::vector<double> dxhat(cols);
          for (int i = 0; i < rows; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (int j = 0; j < cols; ++j) {
              dxhat[j] = G(i, j) * Gn[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat(i, j);
            }
            mean_d /= cols;
            mean_dx /= cols;
            for (int j = 0; j < cols; ++j) {
              GX(i, j) += inv_std[i] * (dxhat[j] - mean_d - xhat(i, j) * mean_dx);
            }
          }
        }
      });
}

Var Conv1d(Var x, Var kernel, int kernel_size) {
  Tape& t = *SameTape({x, kernel}, "conv1d");
  const Tensor& X = x.value();
  const Tensor& W = kernel.value();
  const int T = X.rows(), cin = X.cols(), cout = W.cols();
  if (kernel_size < 1 || W.rows() != kernel_size * cin) ShapeError("conv1d", X, W);
  const int pad = (kernel_size - 1) / 2;
  Tensor Y(T, cout);
  for (int tt = 0; tt < T; ++tt) {
    double* y = Y.row(tt);
    for (int k = 0; k < kernel_size; ++k) {
      const int src = tt + k - pad;
      if (src < 0 || src >= T) continue;
      const double* xr = X.row(src);
      for (int ci = 0; ci < cin; ++ci) {
        const double xv = xr[ci];
        const double* w = W.row(k * cin + ci);
        for (int co = 0; co < cout; ++co) y[co] += xv * w[co];
      }
    }
  }
  const int ix = x.id, iw = kernel.id;
  return t.Record(std::move(Y), AnyGrad(t, {x, kernel}),
                  [ix, iw, kernel_size, pad, T, cin, cout](Tape& tp, int self) {
                    const Tensor& G = tp.grad(self);
                    const Tensor& X = tp.value(ix);
                    const Tensor& W = tp.value(iw);
                    Tensor* GX = tp.requires_grad(ix) ? &tp.GradRef(ix) : nullptr;
                    Tensor* GW = tp.requires_grad(iw) ? &tp.GradRef(iw) : nullptr;
                    for (int tt = 0; tt < T; ++tt) {
                      const double* g = G.row(tt);
                      for (int k = 0; k < kernel_size; ++k) {
                        const int src = tt + k - pad;
                        if (src < 0 || src >= T) continue;
                        const double* xr = X.row(src);
                        for (int ci = 0; ci < cin; ++ci) {
                          const double* w = W.row(k * cin + ci);
                          if (GX) {
                            double s = 0.0;
                            for (int co = 0; co < cout; ++co) s += g[co] * w[co];
                            GX->row(src)[ci] += s;
                          }
                          if (GW) {
                            double* gw = GW->row(k * cin + ci);
                            const double xv = xr[ci];
                            for (int co = 0; co < cout; ++co) gw[co] += xv * g[co];
                          }
                        }
                      }
                    }
                  });
}

Var SoftmaxCrossEntropy(Var logits, std::span<const int> labels_in) {
  Tape& t = *logits.tape;
  const Tensor& L = logits.value();
  if (static_cast<int>(labels_in.size()) != L.rows() || L.rows() == 0) {
    throw Error(ErrorKind::kShape, "softmax_cross_entropy: " + std::to_string(labels_in.size()) +
                                       " labels for logits " + L.ShapeString());
  }
  std::vector<int> labels(labels_in.begin(), labels_in.end());
  Tensor P(L.rows(), L.cols());
  double loss = 0.0;
  for (int i = 0; i < L.rows(); ++i) {
    if (labels[i] < 0 || labels[i] >= L.cols()) {
      throw Error(ErrorKind::kValidation, "softmax_cross_entropy: label " +
                                              std::to_string(labels[i]) + " out of range");
    }
    const double* x = L.row(i);
    double mx = *std::max_element(x, x + L.cols());
    double s = 0.0;
    for (int j = 0; j < L.cols(); ++j) s += (P(i, j) = std::exp(x[j] - mx));
    for (int j = 0; j < L.cols(); ++j) P(i, j) /= s;
    loss += (mx + std::log(s)) - x[labels[i]];
  }
  loss /= L.rows();
  const int il = logits.id;
  return t.Record(Tensor::Scalar(loss), t.requires_grad(il),
                  [il, labels, P = std::move(P)](Tape& tp, int self) {
                    const double g = tp.grad(self)[0] / P.rows();
                    Tensor& GL = tp.GradRef(il);
                    for (int i = 0; i < P.rows(); ++i)
                      for (int j = 0; j < P.cols(); ++j)
                        GL(i, j) += g * (P(i, j) - (j == labels[i] ? 1.0 : 0.0));
                  });
}

Var GradientReverse(Var x, double lambda) {
  if (lambda < 0.0) {
    throw Error(ErrorKind::kValidation, "gradient_reverse: lambda must be >= 0");
  }
  Tape& t = *x.tape;
  const int ix = x.id;
  return t.Record(x.value(), t.requires_grad(ix), [ix, lambda](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& GX = tp.GradRef(ix);
    for (std::size_t i = 0; i < G.size(); ++i) GX[i] += -lambda * G[i];
  });
}

Var ScaledDotAttention(Var q, Var k, Var v, int heads) {
  const Tensor& Q = q.value();
  if (heads < 1 || Q.cols() % heads != 0) {
    throw Error(ErrorKind::kShape, "attention: dim " + std::to_string(Q.cols()) +
                                       " not divisible by " + std::to_string(heads) + " heads");
  }
  if (!Q.SameShape(k.value()) || k.rows() != v.rows()) {
    ShapeError("attention", Q, k.value());
  }
  const int dh = Q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = SliceCols(q, h * dh, (h + 1) * dh);
    Var kh = SliceCols(k, h * dh, (h + 1) * dh);
    Var vh = SliceCols(v, h * (v.cols() / heads), (h + 1) * (v.cols() / heads));
    Var scores = Scale(MatMul(qh, Transpose(kh)), scale);
    outs.push_back(MatMul(SoftmaxRows(scores), vh));
  }
  return heads == 1 ? outs[0] : ConcatCols(outs);
}

}  // namespace warbler::nn
