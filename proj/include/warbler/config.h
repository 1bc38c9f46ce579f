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

// Versioned run configuration in a small TOML subset:
//
//   # comment
//   schema_version = 1
//   seed = 7
//   [duration]
//   epochs = 30
//   use_syllable_term = false
//   [paths]
//   lexicon = "lex.txt"
//
// Values are integers, floats, booleans or double-quoted strings. Unknown
// sections and keys, duplicate keys and type mismatches are errors.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "warbler/acoustic.h"
#include "warbler/augment.h"
#include "warbler/dsp.h"
#include "warbler/duration.h"
#include "warbler/metrics.h"
#include "warbler/synth.h"

namespace warbler {

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 1;

  struct Paths {
    std::string lexicon;
  } paths;

  double silence_merge_seconds = kDefaultSilenceMergeSeconds;

  DspConfig dsp;
  // Fixed by the feature layout; accepted only with these values.
  int bfcc_bands = kBfccDims;
  int lpc_order = kLpcOrder;
  /// Width of the sample-rate network of the downstream vocoder; recorded
  /// for documentation, unused here.
  int vocoder_gru_a_units = kVocoderGruAWidth;

  DurationModelConfig duration_model;
  DurationTrainOptions duration_train;
  int initial_cap_frames = 10;

  AcousticModelConfig acoustic_model;
  AcousticTrainOptions acoustic_train;

  int pause_frames = kPauseFrames;
  bool transpose = false;

  MetricsConfig metrics;
  SynthCorpusOptions synth;

  /// Seeds of the training runs follow the top-level seed.
  void ApplySeed();
  void Validate() const;
};

RunConfig ParseRunConfig(std::string_view text);
RunConfig LoadRunConfig(const std::string& path);
/// Every key with its current value; parses back to an equal config.
std::string FormatRunConfig(const RunConfig& config);

}  // namespace warbler
