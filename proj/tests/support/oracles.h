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

// Independent reference implementations and invariant checkers shared by the
// unit tests and the acceptance runner.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warbler/augment.h"
#include "warbler/dsp.h"
#include "warbler/duration.h"
#include "warbler/metrics.h"
#include "warbler/nn/params.h"
#include "warbler/nn/tensor.h"
#include "warbler/score.h"
#include "warbler/sequence.h"

namespace warbler::oracle {

// ---- Gradient suite ----

struct GradCase {
  std::string name;
  std::function<nn::GradCheckResult(std::uint64_t seed)> run;
};

/// Every primitive, both losses, the reversal path and the two full models.
const std::vector<GradCase>& GradSuite();

/// Central-difference check where the analytic gradient of each parameter is
/// expected to equal `scale(param)` times the numeric one.
nn::GradCheckResult ScaledGradCheck(const std::function<nn::Var(nn::Tape&)>& f,
                                    const std::vector<nn::Parameter*>& params,
                                    const std::function<double(const nn::Parameter&)>& scale,
                                    const nn::GradCheckOptions& options = {});

// ---- Random inputs ----

/// A random score of `events` syllables (some melismatic, some rests).
Score RandomScore(nn::Rng& rng, int events);

/// Rows of a random score with gt_dur set near the nominal durations.
Utterance RandomUtterance(nn::Rng& rng, int events);

/// A random partition of [0, n) into contiguous non-empty groups.
SyllableMap RandomSyllableMap(nn::Rng& rng, int n);

// ---- Loss oracles ----

double BruteMultiscale(std::span<const double> pred, std::span<const double> gt,
                       const SyllableMap& syllables, bool use_syllable_term = true);

double BruteProgressive(const std::vector<nn::Tensor>& projections, const nn::Tensor& target,
                        std::span<const double> weights, bool progressive = true);

// ---- Invariant checkers; return a description of the first violation ----

std::optional<std::string> CheckPostprocessed(std::span<const PhonemeRow> rows,
                                              std::span<const int> out,
                                              int initial_cap = kInitialCapFrames);

std::optional<std::string> CheckSegmentation(const Utterance& utt, int class_index,
                                             std::span<const Clip> clips);

// ---- Metric oracles (plain scalar loops) ----

std::optional<double> BruteF0Rmse(std::span<const F0Point> pred, std::span<const F0Point> ref);
std::optional<double> BruteF0Corr(std::span<const F0Point> pred, std::span<const F0Point> ref);
double BruteVuv(std::span<const F0Point> pred, std::span<const F0Point> ref);
double BruteBfccd(std::span<const BfccFrame> pred, std::span<const BfccFrame> ref);
double BruteDurAcc(std::span<const int> pred, std::span<const int> ref, int tolerance);
std::optional<double> BruteDurCorr(std::span<const int> pred, std::span<const int> ref);

// ---- Test signals ----

Waveform Sawtooth(double hz, double seconds, double amplitude = 0.5);
Waveform WhiteNoise(std::uint64_t seed, double seconds, double amplitude = 0.3);
/// x[n] = 2 r cos(w) x[n-1] - r^2 x[n-2] + e[n], w = 2 pi hz / fs.
Waveform Ar2(double pole_hz, double radius, double seconds, std::uint64_t seed);

/// Relative difference |a - b| / max(|a|, |b|, floor).
double RelDiff(double a, double b, double floor = 1e-300);

}  // namespace warbler::oracle
