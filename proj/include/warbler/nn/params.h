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

// Trainable parameters, the seeded RNG, Adam, finite-difference gradient
// checking and the WSCKPT1 checkpoint format.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "warbler/nn/tape.h"
#include "warbler/nn/tensor.h"

namespace warbler::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Adam moments.
  Tensor m;
  Tensor v;
};

/// Deterministic generator. Distributions are implemented here rather than
/// with <random> distributions so streams are identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  /// Uniform in [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  /// Uniform integer in [0, n).
  int UniformInt(int n);
  double Normal();

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
      std::swap(items[i], items[UniformInt(i + 1)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Owns a model's parameters; pointers stay valid for its lifetime.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  Parameter& Add(const std::string& name, int rows, int cols);
  Parameter& Get(const std::string& name);
  const Parameter& Get(const std::string& name) const;
  bool Has(const std::string& name) const { return by_name_.count(name) > 0; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t num_values() const;

  void ZeroGrad();
  /// Copies values from a set with identical names and shapes.
  void CopyValuesFrom(const ParamSet& other);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static void InitUniform(Parameter& p, int fan_in, Rng& rng);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*> by_name_;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void Step(ParamSet& params);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  int steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
};

/// Cosine-annealed rate for `step` of `total_steps`, from `base` down to
/// `base * final_fraction`.
double CosineLr(double base, double final_fraction, int step, double total_steps);

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double ClipGradNorm(ParamSet& params, double max_norm);

struct GradCheckOptions {
  double step = 1e-5;
  /// Denominator floor of the relative error, for coordinates whose true
  /// gradient is essentially zero.
  double abs_floor = 1e-6;
  /// If > 0, check only this many randomly chosen coordinates per parameter.
  int max_coords_per_param = 0;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  int coords_checked = 0;
};

/// Compares tape gradients of a scalar function with central differences.
/// `f` must build a fresh computation on the tape it is given and return a
/// 1 x 1 result.
GradCheckResult GradCheck(const std::function<Var(Tape&)>& f,
                          const std::vector<Parameter*>& params,
                          const GradCheckOptions& options = {});

// WSCKPT1 checkpoints: magic, JSON manifest (model kind, config, extras),
// then named parameters with shapes as little-endian float32.
struct Checkpoint {
  std::string manifest_json;
  std::map<std::string, Tensor> tensors;
};

void SaveCheckpoint(const std::string& path, const ParamSet& params,
                    const std::string& manifest_json);
std::string EncodeCheckpoint(const ParamSet& params,
                             const std::string& manifest_json);
Checkpoint LoadCheckpoint(const std::string& path);
Checkpoint DecodeCheckpoint(std::string_view bytes);
/// Loads every tensor into `params`; names and shapes must match exactly.
void ApplyCheckpoint(const Checkpoint& ckpt, ParamSet& params);

}  // namespace warbler::nn
