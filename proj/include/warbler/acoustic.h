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

// Non-autoregressive acoustic model: phoneme encoder, duration-based length
// regulation, a decoder whose every block is projected to feature space,
// and an adversarial speaker classifier on the pooled encoder output.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warbler/dsp.h"
#include "warbler/nn/layers.h"
#include "warbler/sequence.h"

namespace warbler {

struct AcousticModelConfig {
  int ph_dim = 16;
  int pt_dim = 8;
  int pi_dim = 16;
  int sr_dim = 8;
  int dim = 32;
  int heads = 2;
  int encoder_blocks = 2;
  /// Decoder FFT blocks, not counting the post-net.
  int decoder_blocks = 2;
  int kernel = 3;
  int filter = 64;
  int speakers = 2;
  double grl_lambda = 0.02;
  /// When false the classifier sees the encoder through an identity layer
  /// and trains it cooperatively instead of adversarially.
  bool grl_reverse = true;
  double pitch_weight = 1.2;

  void Validate() const;
  bool operator==(const AcousticModelConfig&) const = default;
};

/// Per-dimension loss weights: ones with the log-F0 dimension set to
/// `pitch_weight`.
std::vector<double> FeatureWeights(double pitch_weight);

class AcousticModel {
 public:
  AcousticModel(const AcousticModelConfig& config, std::uint64_t seed);

  /// N x dim phoneme-level encoder states.
  nn::Var Encode(nn::Tape& tape, std::span<const PhonemeRow> rows) const;
  /// decoder_blocks + 1 projections of T x 26; the last is the post-net
  /// output and the synthesis result.
  std::vector<nn::Var> Decode(nn::Tape& tape, nn::Var frames, int speaker) const;
  /// Speaker logits (1 x speakers) of the mean-pooled encoder states, seen
  /// through a gradient reversal layer with the configured lambda.
  nn::Var SpeakerLogits(nn::Tape& tape, nn::Var encoded) const;

  /// Encode, regulate by `durations` and decode; returns the final output
  /// (normalized features).
  std::vector<AcousticFrame> Synthesize(std::span<const PhonemeRow> rows,
                                        std::span<const int> durations, int speaker) const;
  /// Mean-pooled encoder states (1 x dim) without recording gradients.
  std::vector<double> PooledEncoding(std::span<const PhonemeRow> rows) const;

  const AcousticModelConfig& config() const { return config_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  void set_grl_lambda(double lambda);
  /// Free-form JSON stored in the checkpoint manifest (normalization
  /// statistics, speaker names).
  const std::string& metadata() const { return metadata_; }
  void set_metadata(std::string json) { metadata_ = std::move(json); }

  void Save(const std::string& path) const;
  static AcousticModel Load(const std::string& path);

 private:
  void CheckSpeaker(int speaker) const;

  AcousticModelConfig config_;
  std::string metadata_ = "{}";
  nn::ParamSet params_;
  nn::Embedding ph_, pt_, pi_, sr_;
  nn::LayerNormLayer in_norm_;
  nn::Linear in_proj_;
  std::vector<nn::FftBlock> encoder_;
  nn::Embedding speaker_;
  std::vector<nn::FftBlock> decoder_;
  std::vector<nn::Linear> projections_;
  nn::Conv1dLayer post1_, post2_;
  nn::Linear classifier_;
};

/// Repeats row i of `states` durations[i] times. Durations must be >= 0
/// with a positive sum.
nn::Var LengthRegulate(nn::Var states, std::span<const int> durations);

/// Adjusts durations so they sum to `frames`, adding to or taking from the
/// last rows first (never below zero).
std::vector<int> FitDurationsToFrames(std::vector<int> durations, int frames);

/// Weighted L1 averaged over dims, frames and projections. With
/// `progressive` false only the last projection contributes.
nn::Var ProgressiveLoss(std::span<const nn::Var> projections, const nn::Tensor& target,
                        std::span<const double> weights, bool progressive = true);

/// Cross-entropy of the speaker classifier; zero without gradient when the
/// model has a single speaker.
nn::Var DatLoss(const AcousticModel& model, nn::Tape& tape, nn::Var encoded, int speaker);

/// A training pair: rows with gt_dur and normalized target frames.
struct AcousticExample {
  Utterance utt;
  std::vector<AcousticFrame> target;
  int speaker = 0;
};

enum class AcousticRecipe { kPretrainMultiSinger, kFinetuneSingle };

struct AcousticTrainOptions {
  AcousticRecipe recipe = AcousticRecipe::kPretrainMultiSinger;
  int epochs = 50;
  double lr = 2e-3;
  /// Cosine decay from lr to lr * final_lr_fraction over all steps.
  double final_lr_fraction = 0.05;
  std::uint64_t seed = 1;
  bool weighted = true;
  bool progressive = true;
  bool dat = true;
  double clip_norm = 1.0;
  double holdout_fraction = 0.0;
  /// Required by the fine-tuning recipe.
  std::string init_checkpoint;
};

struct AcousticEpoch {
  int epoch = 0;
  double loss = 0.0;
  double recon_loss = 0.0;
  double dat_loss = 0.0;
};

struct AcousticTrainReport {
  std::vector<AcousticEpoch> epochs;
  /// Mean final-output L1 on the held-out split, if any.
  std::optional<double> validation_loss;
  int train_examples = 0;
  int heldout_examples = 0;

  std::string ToJson() const;
};

AcousticTrainReport TrainAcoustic(AcousticModel& model, std::span<const AcousticExample> data,
                                  const AcousticTrainOptions& options);

/// Mean final-output L1 (unweighted) of the model on `data`.
double AcousticValidationLoss(const AcousticModel& model, std::span<const AcousticExample> data);

struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Fits a fresh softmax regression on frozen mean-pooled encoder states of
/// `train` and reports accuracy on both splits.
ProbeResult SpeakerProbe(const AcousticModel& model, std::span<const AcousticExample> train,
                         std::span<const AcousticExample> test, std::uint64_t seed,
                         int iterations = 500);

}  // namespace warbler
