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

#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "warbler/acoustic.h"
#include "warbler/nn/layers.h"
#include "warbler/nn/tape.h"

namespace warbler::oracle {

using nn::GradCheckOptions;
using nn::GradCheckResult;
using nn::Parameter;
using nn::ParamSet;
using nn::Rng;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

constexpr std::string_view kLyrics[] = {"ma",  "zhang", "chi", "shi", "an",  "ai",  "ou",
                                        "xin", "yue",   "e",   "qiu", "hua", "wo",  "liang"};

Tensor RandomTensor(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.Uniform(lo, hi);
  return t;
}

/// Values with magnitude in [0.1, 1] and random sign, away from kinks at 0.
Tensor AwayFromZero(Rng& rng, int rows, int cols) {
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng.Uniform(0.1, 1.0) * (rng.Uniform() < 0.5 ? -1.0 : 1.0);
  }
  return t;
}

Parameter& NewParam(ParamSet& ps, const std::string& name, Tensor value) {
  Parameter& p = ps.Add(name, value.rows(), value.cols());
  p.value = std::move(value);
  return p;
}

/// Scalar projection of an arbitrary output onto fixed random weights.
Var Project(Tape& tape, Var out, const Tensor& weights) {
  return nn::Sum(nn::Mul(out, tape.Constant(weights)));
}

int Dim(Rng& rng, int lo, int hi) { return lo + rng.UniformInt(hi - lo + 1); }

std::vector<int> RandomIds(Rng& rng, int n, int vocab) {
  std::vector<int> ids(n);
  for (int& id : ids) id = rng.UniformInt(vocab);
  return ids;
}

GradCheckOptions Options(std::uint64_t seed, int max_coords = 0) {
  GradCheckOptions o;
  o.seed = seed;
  o.max_coords_per_param = max_coords;
  return o;
}

/// Generic primitive case: random parameters, random projection weights.
struct Primitive {
  ParamSet ps;
  Rng rng;
  explicit Primitive(std::uint64_t seed) : rng(seed) {}
  Parameter& Rand(const std::string& name, int r, int c) {
    return NewParam(ps, name, RandomTensor(rng, r, c));
  }
  Parameter& Kinkless(const std::string& name, int r, int c) {
    return NewParam(ps, name, AwayFromZero(rng, r, c));
  }
  GradCheckResult Check(const std::function<Var(Tape&)>& f, int max_coords = 0) {
    return nn::GradCheck(f, ps.all(), Options(rng.NextU64(), max_coords));
  }
};

GradCheckResult BinaryCase(std::uint64_t seed, Var (*op)(Var, Var), bool broadcast) {
  Primitive c(seed);
  const int r = Dim(c.rng, 1, 4), k = Dim(c.rng, 1, 5);
  Parameter& a = c.Rand("a", r, k);
  Parameter& b = c.Rand("b", broadcast ? 1 : r, k);
  Tensor w = RandomTensor(c.rng, r, k);
  return c.Check([&](Tape& t) { return Project(t, op(t.Param(a), t.Param(b)), w); });
}

GradCheckResult UnaryCase(std::uint64_t seed, Var (*op)(Var), bool kinked) {
  Primitive c(seed);
  const int r = Dim(c.rng, 1, 4), k = Dim(c.rng, 1, 5);
  Parameter& a = kinked ? c.Kinkless("a", r, k) : c.Rand("a", r, k);
  Tensor probe = op(Tape().Constant(a.value)).value();
  Tensor w = RandomTensor(c.rng, probe.rows(), probe.cols());
  return c.Check([&](Tape& t) { return Project(t, op(t.Param(a)), w); });
}

Utterance SmallUtterance(Rng& rng) {
  Utterance utt = RandomUtterance(rng, Dim(rng, 2, 4));
  return utt;
}

DurationModelConfig TinyDurationConfig() {
  DurationModelConfig c;
  c.ph_dim = 4;
  c.pt_dim = 2;
  c.pi_dim = 4;
  c.sr_dim = 2;
  c.bt_dim = 3;
  c.layers = 2;
  c.hidden = 5;
  return c;
}

AcousticModelConfig TinyAcousticConfig() {
  AcousticModelConfig c;
  c.ph_dim = 4;
  c.pt_dim = 2;
  c.pi_dim = 4;
  c.sr_dim = 2;
  c.dim = 8;
  c.heads = 2;
  c.encoder_blocks = 1;
  c.decoder_blocks = 2;
  c.kernel = 3;
  c.filter = 12;
  c.speakers = 2;
  return c;
}

/// Target whose entries differ from every projection by at least `margin`.
Tensor TargetAwayFrom(Rng& rng, const std::vector<Tensor>& projections, double margin) {
  const Tensor& last = projections.back();
  Tensor y(last.rows(), last.cols());
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (;;) {
      const double v = last[i] + rng.Uniform(0.05, 0.5) * (rng.Uniform() < 0.5 ? -1.0 : 1.0);
      bool ok = true;
      for (const auto& p : projections) ok = ok && std::abs(p[i] - v) > margin;
      if (ok) {
        y[i] = v;
        break;
      }
    }
  }
  return y;
}

std::vector<int> SmallDurations(Rng& rng, std::size_t n) {
  std::vector<int> d(n);
  for (int& x : d) x = 1 + rng.UniformInt(3);
  return d;
}

std::vector<GradCase> BuildSuite() {
  std::vector<GradCase> s;
  s.push_back({"matmul", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int r = Dim(c.rng, 1, 4), k = Dim(c.rng, 1, 5), m = Dim(c.rng, 1, 4);
                 Parameter& a = c.Rand("a", r, k);
                 Parameter& b = c.Rand("b", k, m);
                 Tensor w = RandomTensor(c.rng, r, m);
                 return c.Check(
                     [&](Tape& t) { return Project(t, nn::MatMul(t.Param(a), t.Param(b)), w); });
               }});
  s.push_back({"transpose", [](std::uint64_t seed) { return UnaryCase(seed, nn::Transpose, false); }});
  s.push_back({"add", [](std::uint64_t seed) { return BinaryCase(seed, nn::Add, false); }});
  s.push_back({"add_broadcast", [](std::uint64_t seed) { return BinaryCase(seed, nn::Add, true); }});
  s.push_back({"sub", [](std::uint64_t seed) { return BinaryCase(seed, nn::Sub, false); }});
  s.push_back({"sub_broadcast", [](std::uint64_t seed) { return BinaryCase(seed, nn::Sub, true); }});
  s.push_back({"mul", [](std::uint64_t seed) { return BinaryCase(seed, nn::Mul, false); }});
  s.push_back({"mul_broadcast", [](std::uint64_t seed) { return BinaryCase(seed, nn::Mul, true); }});
  s.push_back({"scale", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const double f = c.rng.Uniform(-2.0, 2.0);
                 Parameter& a = c.Rand("a", Dim(c.rng, 1, 4), Dim(c.rng, 1, 4));
                 Tensor w = RandomTensor(c.rng, a.value.rows(), a.value.cols());
                 return c.Check([&](Tape& t) { return Project(t, nn::Scale(t.Param(a), f), w); });
               }});
  s.push_back({"tanh", [](std::uint64_t seed) { return UnaryCase(seed, nn::Tanh, false); }});
  s.push_back({"sigmoid", [](std::uint64_t seed) { return UnaryCase(seed, nn::Sigmoid, false); }});
  s.push_back({"relu", [](std::uint64_t seed) { return UnaryCase(seed, nn::Relu, true); }});
  s.push_back({"abs", [](std::uint64_t seed) { return UnaryCase(seed, nn::Abs, true); }});
  s.push_back({"exp", [](std::uint64_t seed) { return UnaryCase(seed, nn::Exp, false); }});
  s.push_back({"sum", [](std::uint64_t seed) { return UnaryCase(seed, nn::Sum, false); }});
  s.push_back({"mean", [](std::uint64_t seed) { return UnaryCase(seed, nn::Mean, false); }});
  s.push_back({"mean_rows", [](std::uint64_t seed) { return UnaryCase(seed, nn::MeanRows, false); }});
  s.push_back({"softmax_rows", [](std::uint64_t seed) { return UnaryCase(seed, nn::SoftmaxRows, false); }});
  s.push_back({"concat_cols", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int r = Dim(c.rng, 1, 4);
                 Parameter& a = c.Rand("a", r, Dim(c.rng, 1, 3));
                 Parameter& b = c.Rand("b", r, Dim(c.rng, 1, 3));
                 Tensor w = RandomTensor(c.rng, r, a.value.cols() + b.value.cols());
                 return c.Check([&](Tape& t) {
                   const Var parts[] = {t.Param(a), t.Param(b)};
                   return Project(t, nn::ConcatCols(parts), w);
                 });
               }});
  s.push_back({"concat_rows", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int k = Dim(c.rng, 1, 4);
                 Parameter& a = c.Rand("a", Dim(c.rng, 1, 3), k);
                 Parameter& b = c.Rand("b", Dim(c.rng, 1, 3), k);
                 Tensor w = RandomTensor(c.rng, a.value.rows() + b.value.rows(), k);
                 return c.Check([&](Tape& t) {
                   const Var parts[] = {t.Param(a), t.Param(b)};
                   return Project(t, nn::ConcatRows(parts), w);
                 });
               }});
  s.push_back({"slice_rows_cols", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int r = Dim(c.rng, 2, 5), k = Dim(c.rng, 2, 5);
                 Parameter& a = c.Rand("a", r, k);
                 const int r0 = c.rng.UniformInt(r - 1), r1 = Dim(c.rng, r0 + 1, r);
                 const int c0 = c.rng.UniformInt(k - 1), c1 = Dim(c.rng, c0 + 1, k);
                 Tensor w = RandomTensor(c.rng, r1 - r0, c1 - c0);
                 return c.Check([&](Tape& t) {
                   return Project(t, nn::SliceCols(nn::SliceRows(t.Param(a), r0, r1), c0, c1), w);
                 });
               }});
  s.push_back({"gather_rows", [](std::uint64_t seed) {
                 Primitive c(seed);
                 Parameter& a = c.Rand("a", Dim(c.rng, 1, 4), Dim(c.rng, 1, 4));
                 auto ids = RandomIds(c.rng, Dim(c.rng, 1, 6), a.value.rows());
                 Tensor w = RandomTensor(c.rng, static_cast<int>(ids.size()), a.value.cols());
                 return c.Check([&](Tape& t) { return Project(t, nn::GatherRows(t.Param(a), ids), w); });
               }});
  s.push_back({"embedding", [](std::uint64_t seed) {
                 Primitive c(seed);
                 nn::Embedding e = nn::Embedding::Create(c.ps, "e", Dim(c.rng, 2, 6), Dim(c.rng, 1, 4), c.rng);
                 auto ids = RandomIds(c.rng, Dim(c.rng, 1, 6), e.vocab());
                 Tensor w = RandomTensor(c.rng, static_cast<int>(ids.size()), e.table->value.cols());
                 return c.Check([&](Tape& t) { return Project(t, e.Apply(t, ids), w); });
               }});
  s.push_back({"layer_norm", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int r = Dim(c.rng, 1, 4), k = Dim(c.rng, 2, 6);
                 Parameter& x = c.Rand("x", r, k);
                 Parameter& g = c.Rand("g", 1, k);
                 Parameter& b = c.Rand("b", 1, k);
                 Tensor w = RandomTensor(c.rng, r, k);
                 return c.Check([&](Tape& t) {
                   return Project(t, nn::LayerNorm(t.Param(x), t.Param(g), t.Param(b)), w);
                 });
               }});
  s.push_back({"conv1d", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int T = Dim(c.rng, 1, 6), cin = Dim(c.rng, 1, 3), cout = Dim(c.rng, 1, 3);
                 const int k = 1 + 2 * c.rng.UniformInt(3);
                 Parameter& x = c.Rand("x", T, cin);
                 Parameter& kern = c.Rand("k", k * cin, cout);
                 Tensor w = RandomTensor(c.rng, T, cout);
                 return c.Check(
                     [&](Tape& t) { return Project(t, nn::Conv1d(t.Param(x), t.Param(kern), k), w); });
               }});
  s.push_back({"softmax_cross_entropy", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int n = Dim(c.rng, 1, 4), k = Dim(c.rng, 2, 5);
                 Parameter& logits = c.Rand("logits", n, k);
                 auto labels = RandomIds(c.rng, n, k);
                 return c.Check([&](Tape& t) { return nn::SoftmaxCrossEntropy(t.Param(logits), labels); });
               }});
  s.push_back({"attention", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int heads = Dim(c.rng, 1, 2), dh = Dim(c.rng, 1, 3), T = Dim(c.rng, 1, 5);
                 Parameter& q = c.Rand("q", T, heads * dh);
                 Parameter& k = c.Rand("k", T, heads * dh);
                 Parameter& v = c.Rand("v", T, heads * dh);
                 Tensor w = RandomTensor(c.rng, T, heads * dh);
                 return c.Check([&](Tape& t) {
                   return Project(t, nn::ScaledDotAttention(t.Param(q), t.Param(k), t.Param(v), heads), w);
                 });
               }});
  for (bool reverse : {false, true}) {
    s.push_back({reverse ? "lstm_recurrence_reverse" : "lstm_recurrence", [reverse](std::uint64_t seed) {
                   Primitive c(seed);
                   const int T = Dim(c.rng, 1, 5), h = Dim(c.rng, 1, 4);
                   Parameter& g = c.Rand("gates", T, 4 * h);
                   Parameter& wh = c.Rand("wh", h, 4 * h);
                   Tensor w = RandomTensor(c.rng, T, h);
                   return c.Check([&](Tape& t) {
                     return Project(t, nn::LstmRecurrence(t.Param(g), t.Param(wh), reverse), w);
                   });
                 }});
  }
  s.push_back({"linear", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int r = Dim(c.rng, 1, 4), in = Dim(c.rng, 1, 5), out = Dim(c.rng, 1, 4);
                 Parameter& x = c.Rand("x", r, in);
                 nn::Linear l = nn::Linear::Create(c.ps, "l", in, out, c.rng);
                 Tensor w = RandomTensor(c.rng, r, out);
                 return c.Check([&](Tape& t) { return Project(t, l.Apply(t, t.Param(x)), w); });
               }});
  s.push_back({"bilstm", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int T = Dim(c.rng, 1, 4), in = Dim(c.rng, 1, 3), h = Dim(c.rng, 1, 3);
                 Parameter& x = c.Rand("x", T, in);
                 nn::BiLstm l = nn::BiLstm::Create(c.ps, "l", in, h, Dim(c.rng, 1, 2), c.rng);
                 Tensor w = RandomTensor(c.rng, T, 2 * h);
                 return c.Check([&](Tape& t) { return Project(t, l.Apply(t, t.Param(x)), w); });
               }});
  s.push_back({"fft_block", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int T = Dim(c.rng, 1, 5), heads = 2, dim = 2 * Dim(c.rng, 1, 3);
                 Parameter& x = c.Rand("x", T, dim);
                 nn::FftBlock b = nn::FftBlock::Create(c.ps, "b", dim, heads, Dim(c.rng, 2, 6), 3, c.rng);
                 Tensor w = RandomTensor(c.rng, T, dim);
                 return c.Check([&](Tape& t) { return Project(t, b.Apply(t, t.Param(x)), w); }, 6);
               }});
  s.push_back({"grl", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const double lambda = c.rng.Uniform(0.01, 1.0);
                 const int r = Dim(c.rng, 1, 4), k = Dim(c.rng, 1, 4), m = Dim(c.rng, 1, 4);
                 Parameter& x = c.Rand("x", r, k);
                 Parameter& wgt = c.Rand("w", k, m);
                 Tensor w = RandomTensor(c.rng, r, m);
                 return ScaledGradCheck(
                     [&](Tape& t) {
                       return Project(t, nn::GradientReverse(nn::Tanh(nn::MatMul(t.Param(x), t.Param(wgt))), lambda), w);
                     },
                     c.ps.all(), [lambda](const Parameter&) { return -lambda; },
                     Options(c.rng.NextU64()));
               }});
  for (bool syl : {true, false}) {
    s.push_back({syl ? "multiscale_loss" : "multiscale_loss_term2_only", [syl](std::uint64_t seed) {
                   Primitive c(seed);
                   const int n = Dim(c.rng, 1, 10);
                   Parameter& logd = c.Rand("log_pred", n, 1);
                   std::vector<double> gt(n);
                   for (double& g : gt) g = c.rng.Uniform(0.5, 3.0);
                   SyllableMap map = RandomSyllableMap(c.rng, n);
                   return c.Check([&](Tape& t) {
                     return MultiscaleLoss(nn::Exp(t.Param(logd)), gt, map, syl);
                   });
                 }});
  }
  for (bool progressive : {true, false}) {
    s.push_back({progressive ? "progressive_loss" : "progressive_loss_final_only",
                 [progressive](std::uint64_t seed) {
                   Primitive c(seed);
                   const int T = Dim(c.rng, 1, 4), blocks = Dim(c.rng, 1, 3);
                   std::vector<Parameter*> proj;
                   std::vector<Tensor> values;
                   for (int b = 0; b < blocks; ++b) {
                     proj.push_back(&c.Rand("proj" + std::to_string(b), T, kFeatureDims));
                     values.push_back(proj.back()->value);
                   }
                   Tensor y = TargetAwayFrom(c.rng, values, 1e-3);
                   auto w = FeatureWeights(1.2);
                   return c.Check([&](Tape& t) {
                     std::vector<Var> vars;
                     for (Parameter* p : proj) vars.push_back(t.Param(*p));
                     return ProgressiveLoss(vars, y, w, progressive);
                   });
                 }});
  }
  s.push_back({"length_regulate", [](std::uint64_t seed) {
                 Primitive c(seed);
                 const int n = Dim(c.rng, 1, 5);
                 Parameter& states = c.Rand("states", n, Dim(c.rng, 1, 4));
                 std::vector<int> d(n);
                 for (int& x : d) x = c.rng.UniformInt(4);
                 d[c.rng.UniformInt(n)] += 1;
                 int total = 0;
                 for (int x : d) total += x;
                 Tensor w = RandomTensor(c.rng, total, states.value.cols());
                 return c.Check([&](Tape& t) { return Project(t, LengthRegulate(t.Param(states), d), w); });
               }});
  s.push_back({"duration_model", [](std::uint64_t seed) {
                 Rng rng(seed);
                 Utterance utt = SmallUtterance(rng);
                 DurationModel model(TinyDurationConfig(), rng.NextU64());
                 std::vector<double> gt(utt.rows.size());
                 for (double& g : gt) g = rng.Uniform(0.5, 3.0);
                 SyllableMap map = SyllableRanges(utt.rows);
                 return nn::GradCheck(
                     [&](Tape& t) {
                       return MultiscaleLoss(nn::Exp(model.Forward(t, utt.rows)), gt, map, true);
                     },
                     model.params().all(), Options(rng.NextU64(), 3));
               }});
  s.push_back({"acoustic_model", [](std::uint64_t seed) {
                 Rng rng(seed);
                 Utterance utt = SmallUtterance(rng);
                 AcousticModelConfig cfg = TinyAcousticConfig();
                 AcousticModel model(cfg, rng.NextU64());
                 auto d = SmallDurations(rng, utt.rows.size());
                 const int speaker = rng.UniformInt(cfg.speakers);
                 auto forward = [&](Tape& t) {
                   return model.Decode(t, LengthRegulate(model.Encode(t, utt.rows), d), speaker);
                 };
                 std::vector<Tensor> values;
                 {
                   Tape t;
                   for (Var v : forward(t)) values.push_back(v.value());
                 }
                 Tensor y = TargetAwayFrom(rng, values, 1e-3);
                 auto w = FeatureWeights(cfg.pitch_weight);
                 return nn::GradCheck(
                     [&](Tape& t) { return ProgressiveLoss(forward(t), y, w, true); },
                     model.params().all(), Options(rng.NextU64(), 3));
               }});
  s.push_back({"dat_path", [](std::uint64_t seed) {
                 Rng rng(seed);
                 Utterance utt = SmallUtterance(rng);
                 AcousticModelConfig cfg = TinyAcousticConfig();
                 cfg.speakers = Dim(rng, 2, 3);
                 AcousticModel model(cfg, rng.NextU64());
                 const int speaker = rng.UniformInt(cfg.speakers);
                 const double lambda = cfg.grl_lambda;
                 return ScaledGradCheck(
                     [&](Tape& t) { return DatLoss(model, t, model.Encode(t, utt.rows), speaker); },
                     model.params().all(),
                     [lambda](const Parameter& p) {
                       return p.name.rfind("ac/speaker_cls", 0) == 0 ? 1.0 : -lambda;
                     },
                     Options(rng.NextU64(), 3));
               }});
  return s;
}

}  // namespace

const std::vector<GradCase>& GradSuite() {
  static const std::vector<GradCase> suite = BuildSuite();
  return suite;
}

GradCheckResult ScaledGradCheck(const std::function<Var(Tape&)>& f,
                                const std::vector<Parameter*>& params,
                                const std::function<double(const Parameter&)>& scale,
                                const GradCheckOptions& options) {
  for (Parameter* p : params) p->grad = Tensor(p->value.rows(), p->value.cols());
  {
    Tape tape;
    tape.Backward(f(tape));
  }
  auto eval = [&f]() {
    Tape tape;
    return f(tape).value().item();
  };
  GradCheckResult result;
  Rng rng(options.seed);
  for (Parameter* p : params) {
    std::vector<int> coords(p->value.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = static_cast<int>(i);
    if (options.max_coords_per_param > 0 &&
        static_cast<int>(coords.size()) > options.max_coords_per_param) {
      rng.Shuffle(coords);
      coords.resize(options.max_coords_per_param);
    }
    const double s = scale(*p);
    for (int i : coords) {
      const double orig = p->value[i];
      p->value[i] = orig + options.step;
      const double up = eval();
      p->value[i] = orig - options.step;
      const double down = eval();
      p->value[i] = orig;
      const double numeric = s * (up - down) / (2.0 * options.step);
      const double analytic = p->grad[i];
      const double rel = std::abs(numeric - analytic) /
                         std::max({std::abs(numeric), std::abs(analytic), options.abs_floor});
      ++result.coords_checked;
      if (rel > result.max_rel_error || result.worst_index < 0) {
        result.max_rel_error = std::max(rel, result.max_rel_error);
        result.worst_param = p->name;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

Score RandomScore(Rng& rng, int events) {
  Score score;
  score.bpm = rng.Uniform(80.0, 160.0);
  for (int e = 0; e < events; ++e) {
    SyllableEvent ev;
    if (rng.Uniform() < 0.15) {
      ev.notes.push_back(Note{NotePitch::Rest(), Beats(1 + rng.UniformInt(4), 2)});
      score.events.push_back(std::move(ev));
      continue;
    }
    ev.pinyin = std::string(kLyrics[rng.UniformInt(static_cast<int>(std::size(kLyrics)))]);
    const double u = rng.Uniform();
    const int notes = u < 0.7 ? 1 : (u < 0.9 ? 2 : 3);
    for (int k = 0; k < notes; ++k) {
      Note n;
      n.pitch = NotePitch{55 + rng.UniformInt(16), false};
      n.beats = Beats(1 + rng.UniformInt(8), 4);
      if (notes > 1) {
        n.slur = k == 0 ? SlurFlag::kStart : (k + 1 == notes ? SlurFlag::kStop : SlurFlag::kContinue);
      }
      ev.notes.push_back(n);
    }
    score.events.push_back(std::move(ev));
  }
  return score;
}

Utterance RandomUtterance(Rng& rng, int events) {
  Utterance utt;
  utt.id = "rand";
  utt.singer_id = "s";
  utt.rows = BuildRows(RandomScore(rng, events));
  for (auto& r : utt.rows) r.gt_dur = std::max(1, r.nominal_dur + rng.UniformInt(5) - 2);
  return utt;
}

SyllableMap RandomSyllableMap(Rng& rng, int n) {
  SyllableMap map;
  int b = 0;
  while (b < n) {
    const int e = std::min(n, b + 1 + rng.UniformInt(3));
    map.emplace_back(b, e);
    b = e;
  }
  return map;
}

double BruteMultiscale(std::span<const double> pred, std::span<const double> gt,
                       const SyllableMap& syllables, bool use_syllable_term) {
  const std::size_t n = gt.size();
  double term2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = gt[i] - pred[i];
    term2 += std::abs(d) * std::abs(d);
  }
  term2 /= static_cast<double>(n);
  if (!use_syllable_term) return term2;
  double term1 = 0.0;
  for (const auto& range : syllables) {
    double s = 0.0;
    for (int i = range.first; i < range.second; ++i) s += gt[i] - pred[i];
    term1 += std::abs(s) * std::abs(s);
  }
  term1 /= static_cast<double>(syllables.size());
  return term1 + term2;
}

double BruteProgressive(const std::vector<Tensor>& projections, const Tensor& target,
                        std::span<const double> weights, bool progressive) {
  const std::size_t first = progressive ? 0 : projections.size() - 1;
  const double blocks = static_cast<double>(projections.size() - first);
  const int T = target.rows(), D = target.cols();
  double total = 0.0;
  for (int t = 0; t < T; ++t) {
    double frame = 0.0;
    for (std::size_t j = first; j < projections.size(); ++j) {
      double dims = 0.0;
      for (int d = 0; d < D; ++d) dims += weights[d] * std::abs(projections[j](t, d) - target(t, d));
      frame += dims / D;
    }
    total += frame / blocks;
  }
  return total / T;
}

std::optional<std::string> CheckPostprocessed(std::span<const PhonemeRow> rows,
                                              std::span<const int> out, int initial_cap) {
  if (rows.size() != out.size()) return "length mismatch";
  std::size_t b = 0;
  while (b < rows.size()) {
    std::size_t e = b;
    while (e < rows.size() && rows[e].syllable_index == rows[b].syllable_index) ++e;
    long long note_frames = 0, got = 0;
    for (std::size_t i = b; i < e; ++i) {
      note_frames += rows[i].nominal_dur;
      got += out[i];
      if (out[i] < 0) return "negative duration at row " + std::to_string(i);
      if (rows[i].pt == PhonemeType::kInitial && out[i] > initial_cap) {
        return "initial of " + std::to_string(out[i]) + " frames at row " + std::to_string(i);
      }
      if (rows[i].is_silence() && out[i] != rows[i].nominal_dur) {
        return "silence row " + std::to_string(i) + " changed";
      }
    }
    if (got != note_frames) {
      return "syllable at row " + std::to_string(b) + " sums to " + std::to_string(got) +
             ", notes give " + std::to_string(note_frames);
    }
    b = e;
  }
  return std::nullopt;
}

std::optional<std::string> CheckSegmentation(const Utterance& utt, int class_index,
                                             std::span<const Clip> clips) {
  const SegmentClass& cls = kSegmentClasses[class_index];
  std::vector<int> start(utt.rows.size() + 1, 0);
  for (std::size_t i = 0; i < utt.rows.size(); ++i) start[i + 1] = start[i] + *utt.rows[i].gt_dur;
  const int total = start.back();
  if (clips.empty()) return total > 0 ? std::optional<std::string>("no clips") : std::nullopt;
  const std::string tag = utt.id + " class " + std::string(cls.name) + ": ";
  if (clips.front().start_frame != 0) return tag + "first clip does not start at 0";
  if (clips.back().end_frame != total) return tag + "last clip does not end at the song end";
  for (std::size_t k = 0; k < clips.size(); ++k) {
    const Clip& c = clips[k];
    if (c.class_index != class_index) return tag + "wrong class tag on " + c.clip_id;
    if (k > 0 && clips[k - 1].end_frame != c.start_frame) return tag + "gap or overlap at " + c.clip_id;
    const int f = c.frames();
    if (f <= 0) return tag + "empty clip " + c.clip_id;
    const bool over = f > cls.upper_frames;
    const bool under = f <= cls.lower_frames;
    if (over != (c.flag == ClipFlag::kOverLength)) return tag + "over-length flag mismatch on " + c.clip_id;
    if (under && !(c.flag == ClipFlag::kUnderLength && clips.size() == 1)) {
      return tag + "under-length clip " + c.clip_id + " of " + std::to_string(f) + " frames";
    }
  }
  // Each non-silence row lies wholly inside exactly one clip; syllables are
  // never split across clips.
  std::vector<int> owner(utt.rows.size(), -1);
  for (std::size_t i = 0; i < utt.rows.size(); ++i) {
    if (utt.rows[i].is_silence() || start[i + 1] == start[i]) continue;
    int count = 0;
    for (std::size_t k = 0; k < clips.size(); ++k) {
      const bool overlaps = start[i] < clips[k].end_frame && start[i + 1] > clips[k].start_frame;
      if (!overlaps) continue;
      if (start[i] < clips[k].start_frame || start[i + 1] > clips[k].end_frame) {
        return tag + "row " + std::to_string(i) + " split by clip " + clips[k].clip_id;
      }
      owner[i] = static_cast<int>(k);
      ++count;
    }
    if (count != 1) return tag + "row " + std::to_string(i) + " in " + std::to_string(count) + " clips";
  }
  for (std::size_t i = 1; i < utt.rows.size(); ++i) {
    if (owner[i] >= 0 && owner[i - 1] >= 0 &&
        utt.rows[i].syllable_index == utt.rows[i - 1].syllable_index && owner[i] != owner[i - 1]) {
      return tag + "syllable " + std::to_string(utt.rows[i].syllable_index) + " split";
    }
  }
  for (const Clip& c : clips) {
    Utterance part = ClipUtterance(utt, c);
    int sum = 0;
    for (const auto& r : part.rows) sum += *r.gt_dur;
    if (sum != c.frames()) return tag + "clip " + c.clip_id + " rows do not sum to its length";
  }
  return std::nullopt;
}

namespace {

std::optional<double> BrutePearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::optional<double> BruteF0Rmse(std::span<const F0Point> pred, std::span<const F0Point> ref) {
  double se = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i].voiced || !ref[i].voiced) continue;
    se += (pred[i].f0_hz - ref[i].f0_hz) * (pred[i].f0_hz - ref[i].f0_hz);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(se / n);
}

std::optional<double> BruteF0Corr(std::span<const F0Point> pred, std::span<const F0Point> ref) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i].voiced || !ref[i].voiced) continue;
    a.push_back(pred[i].f0_hz);
    b.push_back(ref[i].f0_hz);
  }
  return BrutePearson(a, b);
}

double BruteVuv(std::span<const F0Point> pred, std::span<const F0Point> ref) {
  int bad = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) bad += pred[i].voiced != ref[i].voiced;
  return static_cast<double>(bad) / static_cast<double>(pred.size());
}

double BruteBfccd(std::span<const BfccFrame> pred, std::span<const BfccFrame> ref) {
  const double k = 10.0 * std::sqrt(2.0) / std::log(10.0);
  double total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    double s = 0.0;
    for (int i = 1; i < kBfccDims; ++i) s += (pred[t][i] - ref[t][i]) * (pred[t][i] - ref[t][i]);
    total += k * std::sqrt(s);
  }
  return total / static_cast<double>(pred.size());
}

double BruteDurAcc(std::span<const int> pred, std::span<const int> ref, int tolerance) {
  int ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += std::abs(pred[i] - ref[i]) <= tolerance;
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

std::optional<double> BruteDurCorr(std::span<const int> pred, std::span<const int> ref) {
  return BrutePearson(std::vector<double>(pred.begin(), pred.end()),
                      std::vector<double>(ref.begin(), ref.end()));
}

Waveform Sawtooth(double hz, double seconds, double amplitude) {
  Waveform w;
  const int n = static_cast<int>(std::lround(seconds * w.sample_rate));
  w.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    const double phase = std::fmod(hz * i / w.sample_rate, 1.0);
    w.samples[i] = amplitude * (2.0 * phase - 1.0);
  }
  return w;
}

Waveform WhiteNoise(std::uint64_t seed, double seconds, double amplitude) {
  Waveform w;
  Rng rng(seed);
  const int n = static_cast<int>(std::lround(seconds * w.sample_rate));
  w.samples.resize(n);
  for (double& x : w.samples) x = rng.Uniform(-amplitude, amplitude);
  return w;
}

Waveform Ar2(double pole_hz, double radius, double seconds, std::uint64_t seed) {
  Waveform w;
  Rng rng(seed);
  const int n = static_cast<int>(std::lround(seconds * w.sample_rate));
  const double a1 = 2.0 * radius * std::cos(2.0 * std::numbers::pi * pole_hz / w.sample_rate);
  const double a2 = -radius * radius;
  w.samples.assign(n, 0.0);
  double peak = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x1 = i >= 1 ? w.samples[i - 1] : 0.0;
    const double x2 = i >= 2 ? w.samples[i - 2] : 0.0;
    w.samples[i] = a1 * x1 + a2 * x2 + rng.Normal();
    peak = std::max(peak, std::abs(w.samples[i]));
  }
  for (double& x : w.samples) x *= 0.5 / peak;
  return w;
}

double RelDiff(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace warbler::oracle
