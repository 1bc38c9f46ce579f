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

// Phoneme duration model: embeddings of the note-level inputs, layer
// normalization, a stacked bidirectional LSTM and a scalar log-duration head.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "warbler/nn/layers.h"
#include "warbler/sequence.h"

namespace warbler {

struct DurationModelConfig {
  int ph_dim = 32;
  int pt_dim = 32;
  int pi_dim = 32;
  int sr_dim = 32;
  int bt_dim = 32;
  int layers = 2;
  int hidden = 64;

  void Validate() const;
  bool operator==(const DurationModelConfig&) const = default;
};

class DurationModel {
 public:
  DurationModel(const DurationModelConfig& config, std::uint64_t seed);

  /// N x 1 log-duration predictions (log frames) for one utterance.
  nn::Var Forward(nn::Tape& tape, std::span<const PhonemeRow> rows) const;
  std::vector<double> PredictLogDurations(std::span<const PhonemeRow> rows) const;

  const DurationModelConfig& config() const { return config_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  nn::Parameter& output_bias() { return *head_.b; }

  void Save(const std::string& path) const;
  static DurationModel Load(const std::string& path);

 private:
  DurationModelConfig config_;
  nn::ParamSet params_;
  nn::Embedding ph_, pt_, pi_, sr_;
  nn::Linear bt_;
  nn::LayerNormLayer norm_;
  nn::BiLstm lstm_;
  nn::Linear head_;
};

/// Row groups of the syllable term: one [begin, end) range per syllable.
using SyllableMap = std::vector<SyllableRange>;

/// Rhythm loss on linear-domain frame counts. `pred` is N x 1.
/// term1 = mean over syllables of (sum over the syllable of gt - pred)^2,
/// term2 = mean over rows of (gt - pred)^2. Without the syllable term only
/// term2 is returned.
nn::Var MultiscaleLoss(nn::Var pred, std::span<const double> gt,
                       const SyllableMap& syllables, bool use_syllable_term = true);

struct MultiscaleTerms {
  double term1 = 0.0;
  double term2 = 0.0;
  double total() const { return term1 + term2; }
};
MultiscaleTerms MultiscaleLossTerms(std::span<const double> pred, std::span<const double> gt,
                                    const SyllableMap& syllables);

/// Fits predicted frame counts to the score: each syllable is rescaled to
/// its note total with largest-remainder rounding, then initials are capped
/// at `initial_cap` frames and the excess goes to the syllable's finals in
/// proportion to their length. Silence rows keep their nominal duration.
inline constexpr int kInitialCapFrames = 10;
std::vector<int> PostprocessDurations(std::span<const double> pred_frames,
                                      std::span<const PhonemeRow> rows,
                                      int initial_cap = kInitialCapFrames);

/// Splits `total` into integers proportional to `weights` (largest remainder,
/// ties to the lower index). The result sums to `total` exactly.
std::vector<int> ApportionLargestRemainder(std::span<const double> weights, int total);

struct DurationTrainOptions {
  int epochs = 20;
  double lr = 3e-3;
  /// Cosine decay from lr to lr * final_lr_fraction over all steps.
  double final_lr_fraction = 0.05;
  std::uint64_t seed = 1;
  bool use_syllable_term = true;
  /// Fraction of utterances held out for validation (at least one when the
  /// corpus has two or more utterances and the fraction is positive).
  double holdout_fraction = 0.1;
  double clip_norm = 5.0;
  int dur_acc_tolerance = 5;
};

struct DurationEpoch {
  int epoch = 0;
  double loss = 0.0;
};

struct DurationEval {
  double dur_acc = 0.0;
  double dur_corr = 0.0;
  /// Mean over syllables of |sum pred - sum gt| in frames, raw predictions.
  double syllable_sum_mae = 0.0;
  int rows = 0;
};

struct DurationTrainReport {
  std::vector<DurationEpoch> epochs;
  DurationEval train;
  DurationEval heldout;
  int train_utterances = 0;
  int heldout_utterances = 0;

  std::string ToJson() const;
};

/// Sets the output bias to the mean log ground-truth duration of `corpus`.
void InitDurationOutputBias(DurationModel& model, std::span<const Utterance> corpus);

DurationTrainReport TrainDuration(DurationModel& model, std::span<const Utterance> corpus,
                                  const DurationTrainOptions& options);

/// Dur Acc/CORR and syllable-sum error of raw predictions against gt_dur.
DurationEval EvaluateDuration(const DurationModel& model, std::span<const Utterance> corpus,
                              int dur_acc_tolerance = 5);

}  // namespace warbler
