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

// Objective metrics for durations, pitch tracks and cepstral features.
// Metrics that are undefined for their input (no overlapping voiced frames,
// zero variance) are reported as absent rather than as a number.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "warbler/dsp.h"

namespace warbler {

struct F0Point {
  double f0_hz = 0.0;
  bool voiced = false;
};

/// RMSE in Hz over frames voiced in both tracks.
std::optional<double> F0Rmse(std::span<const F0Point> pred, std::span<const F0Point> ref);
/// Pearson correlation over frames voiced in both tracks.
std::optional<double> F0Corr(std::span<const F0Point> pred, std::span<const F0Point> ref);
/// Fraction of frames whose voicing flags disagree.
double VuvError(std::span<const F0Point> pred, std::span<const F0Point> ref);
/// Mean cepstral distortion in dB over coefficients 1..23.
double Bfccd(std::span<const BfccFrame> pred, std::span<const BfccFrame> ref);
/// Fraction of phonemes with |pred - ref| <= tolerance frames.
double DurAcc(std::span<const int> pred, std::span<const int> ref, int tolerance = 5);
std::optional<double> DurCorr(std::span<const int> pred, std::span<const int> ref);

/// Pearson correlation; absent for fewer than two points or zero variance.
std::optional<double> Pearson(std::span<const double> a, std::span<const double> b);

/// exp(log_f0) with voicing from pitch_corr >= threshold.
std::vector<F0Point> F0Track(std::span<const AcousticFrame> frames,
                             double voicing_threshold = 0.3);

struct MetricsConfig {
  int dur_tolerance = 5;
  double voicing_threshold = 0.3;

  bool operator==(const MetricsConfig&) const = default;
};

struct MetricsReport {
  std::optional<double> f0_rmse;
  std::optional<double> f0_corr;
  std::optional<double> vuv_error;
  std::optional<double> bfccd;
  std::optional<double> dur_acc;
  std::optional<double> dur_corr;
  MetricsConfig config;

  std::string ToJson() const;
  static MetricsReport FromJson(std::string_view json);
  bool operator==(const MetricsReport&) const = default;
};

/// Pitch and cepstral metrics between two denormalized feature sequences.
MetricsReport EvaluateFeatures(std::span<const AcousticFrame> pred,
                               std::span<const AcousticFrame> ref,
                               const MetricsConfig& config = {});
MetricsReport EvaluateDurations(std::span<const int> pred, std::span<const int> ref,
                                const MetricsConfig& config = {});

}  // namespace warbler
