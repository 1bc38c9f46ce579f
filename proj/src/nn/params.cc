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

#include "warbler/nn/params.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "../binary_io.h"
#include "warbler/error.h"

namespace warbler::nn {

namespace {
constexpr std::string_view kCheckpointMagic = "WSCKPT1";
}

int Rng::UniformInt(int n) {
  if (n <= 0) throw Error(ErrorKind::kRange, "UniformInt: n must be positive");
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<int>(x % range);
}

double Rng::Normal() {
  // Box-Muller; one value per call keeps the stream position simple.
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Parameter& ParamSet::Add(const std::string& name, int rows, int cols) {
  if (by_name_.count(name)) {
    throw Error(ErrorKind::kValidation, "duplicate parameter name " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(rows, cols);
  p->grad = Tensor(rows, cols);
  p->m = Tensor(rows, cols);
  p->v = Tensor(rows, cols);
  Parameter& ref = *p;
  by_name_[name] = &ref;
  params_.push_back(std::move(p));
  return ref;
}

Parameter& ParamSet::Get(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error(ErrorKind::kValidation, "unknown parameter " + name);
  return *it->second;
}

const Parameter& ParamSet::Get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error(ErrorKind::kValidation, "unknown parameter " + name);
  return *it->second;
}

std::vector<Parameter*> ParamSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamSet::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParamSet::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParamSet::ZeroGrad() {
  for (auto& p : params_) p->grad.Fill(0.0);
}

void ParamSet::CopyValuesFrom(const ParamSet& other) {
  if (other.size() != size()) {
    throw Error(ErrorKind::kShape, "CopyValuesFrom: parameter count mismatch");
  }
  for (auto& p : params_) {
    const Parameter& src = other.Get(p->name);
    if (!src.value.SameShape(p->value)) {
      throw Error(ErrorKind::kShape, "CopyValuesFrom: shape mismatch for " + p->name);
    }
    p->value = src.value;
  }
}

void ParamSet::InitUniform(Parameter& p, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.Uniform(-bound, bound);
}

void Adam::Step(ParamSet& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (Parameter* p : params.all()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      p->m[i] = beta1_ * p->m[i] + (1.0 - beta1_) * g;
      p->v[i] = beta2_ * p->v[i] + (1.0 - beta2_) * g * g;
      const double mhat = p->m[i] / c1;
      const double vhat = p->v[i] / c2;
      p->value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double CosineLr(double base, double final_fraction, int step, double total_steps) {
  if (total_steps <= 1.0) return base;
  const double t = std::min(1.0, static_cast<double>(step) / (total_steps - 1.0));
  const double f = final_fraction + (1.0 - final_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  return base * f;
}

double ClipGradNorm(ParamSet& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : std::as_const(params).all()) {
    for (double g : p->grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter* p : params.all()) {
      for (double& g : p->grad.values()) g *= s;
    }
  }
  return norm;
}

GradCheckResult GradCheck(const std::function<Var(Tape&)>& f,
                          const std::vector<Parameter*>& params,
                          const GradCheckOptions& options) {
  for (Parameter* p : params) p->grad = Tensor(p->value.rows(), p->value.cols());
  {
    Tape tape;
    Var loss = f(tape);
    tape.Backward(loss);
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
    for (int i : coords) {
      const double orig = p->value[i];
      p->value[i] = orig + options.step;
      const double up = eval();
      p->value[i] = orig - options.step;
      const double down = eval();
      p->value[i] = orig;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = p->grad[i];
      const double denom =
          std::max({std::abs(numeric), std::abs(analytic), options.abs_floor});
      const double rel = std::abs(numeric - analytic) / denom;
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

std::string EncodeCheckpoint(const ParamSet& params, const std::string& manifest_json) {
  io::ByteWriter out;
  out.Raw(kCheckpointMagic);
  out.Str(manifest_json);
  out.U32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params.all()) {
    out.Str(p->name);
    out.U32(static_cast<std::uint32_t>(p->value.rows()));
    out.U32(static_cast<std::uint32_t>(p->value.cols()));
    for (double v : p->value.values()) out.F32(static_cast<float>(v));
  }
  return out.bytes();
}

void SaveCheckpoint(const std::string& path, const ParamSet& params,
                    const std::string& manifest_json) {
  io::WriteFile(path, EncodeCheckpoint(params, manifest_json));
}

Checkpoint DecodeCheckpoint(std::string_view bytes) {
  io::ByteReader r(bytes, "checkpoint");
  r.Expect(kCheckpointMagic);
  Checkpoint ckpt;
  ckpt.manifest_json = r.Str();
  const std::uint32_t count = r.U32();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.Str();
    const std::uint32_t rows = r.U32();
    const std::uint32_t cols = r.U32();
    if (static_cast<std::uint64_t>(rows) * cols * 4 > r.remaining()) {
      throw Error(ErrorKind::kParse, "checkpoint: truncated file");
    }
    Tensor t(static_cast<int>(rows), static_cast<int>(cols));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.F32();
    if (!ckpt.tensors.emplace(name, std::move(t)).second) {
      throw Error(ErrorKind::kParse, "checkpoint: duplicate tensor " + name);
    }
  }
  if (!r.done()) throw Error(ErrorKind::kParse, "checkpoint: trailing bytes");
  return ckpt;
}

Checkpoint LoadCheckpoint(const std::string& path) {
  return DecodeCheckpoint(io::ReadFile(path));
}

void ApplyCheckpoint(const Checkpoint& ckpt, ParamSet& params) {
  if (ckpt.tensors.size() != params.size()) {
    throw Error(ErrorKind::kShape, "checkpoint has " + std::to_string(ckpt.tensors.size()) +
                                       " tensors, model expects " +
                                       std::to_string(params.size()));
  }
  for (Parameter* p : params.all()) {
    auto it = ckpt.tensors.find(p->name);
    if (it == ckpt.tensors.end()) {
      throw Error(ErrorKind::kShape, "checkpoint is missing tensor " + p->name);
    }
    if (!it->second.SameShape(p->value)) {
      throw Error(ErrorKind::kShape, "checkpoint tensor " + p->name + " has shape " +
                                         it->second.ShapeString() + ", model expects " +
                                         p->value.ShapeString());
    }
    p->value = it->second;
  }
}

}  // namespace warbler::nn
