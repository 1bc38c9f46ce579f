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

// Seeded synthetic singing corpus: random phrase-structured scores, "sung"
// interval annotations whose timing deviates from the score, and audio
// rendered as formant-filtered sawtooth (voiced) or noise (unvoiced
// initials) at the note pitch, so pitch ground truth is known exactly.
//
// Singers share pitch range and melody statistics and differ in timbre
// (formant scale) and phrasing: the first singer marks legato slurs across
// syllables, the others do not.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "warbler/dsp.h"
#include "warbler/score.h"
#include "warbler/sequence.h"

namespace warbler {

struct SynthCorpusOptions {
  int singers = 2;
  int songs = 8;
  std::uint64_t seed = 1;
  int min_phrases = 4;
  int max_phrases = 6;
  int min_syllables = 3;
  int max_syllables = 6;
  double melisma_probability = 0.2;
  double legato_probability = 0.7;
  int min_midi = 50;
  int max_midi = 67;
  bool render_audio = true;
};

struct SynthSong {
  std::string id;
  std::string singer_id;
  int singer_index = 0;
  Score score;
  std::vector<IntervalEntry> intervals;
  Waveform audio;
};

std::vector<SynthSong> GenerateSynthCorpus(const SynthCorpusOptions& options);

/// Serializes a score as part-wise MusicXML that ParseMusicXml reads back
/// to an equal Score.
std::string WriteMusicXml(const Score& score);

/// Renders audio for annotated intervals; `rows` supplies the pitch of each
/// interval (rows and intervals correspond one to one).
Waveform RenderSinging(const std::vector<PhonemeRow>& rows,
                       const std::vector<IntervalEntry>& intervals, int singer_index,
                       std::uint64_t seed);

/// Writes scores/, intervals/, wav/ and manifest.jsonl under `dir`.
/// Returns the manifest path.
std::string WriteSynthCorpus(const std::string& dir, const SynthCorpusOptions& options);

}  // namespace warbler
