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

// Corpus manifests (JSON lines of score, interval and audio paths) and the
// assembly of training data from them.

#pragma once

#include <string>
#include <vector>

#include "warbler/acoustic.h"
#include "warbler/augment.h"
#include "warbler/dsp.h"
#include "warbler/score.h"
#include "warbler/sequence.h"

namespace warbler {

/// One song. Paths are resolved against the manifest's directory.
struct CorpusEntry {
  std::string id;
  std::string singer;
  std::string score;
  std::string intervals;
  std::string wav;  // may be empty
};

std::vector<CorpusEntry> ReadCorpusManifest(const std::string& path);

/// Parses the score, builds rows and attaches the annotated durations.
Utterance LoadAnnotatedUtterance(const CorpusEntry& entry, const Lexicon* lexicon = nullptr,
                                 double silence_merge_seconds = kDefaultSilenceMergeSeconds);

/// Sorted distinct singer ids; a singer's index is its position here.
std::vector<std::string> SingerList(const std::vector<CorpusEntry>& entries);
int SingerIndex(const std::vector<std::string>& singers, const std::string& singer);

struct AnnotatedSong {
  Utterance utt;
  std::vector<AcousticFrame> features;  // raw, not normalized
  int speaker = 0;
};

/// Loads every entry with audio and extracts its features.
std::vector<AnnotatedSong> LoadAnnotatedSongs(
    const std::vector<CorpusEntry>& entries, const std::vector<std::string>& singers,
    const DspConfig& dsp = {}, const Lexicon* lexicon = nullptr,
    double silence_merge_seconds = kDefaultSilenceMergeSeconds);

NormStats FitSongStats(const std::vector<AnnotatedSong>& songs);

/// Whole-song examples, or with `vs_clips` the clips of all three
/// segmentations; targets are normalized with `stats`.
std::vector<AcousticExample> MakeAcousticExamples(const std::vector<AnnotatedSong>& songs,
                                                  const NormStats& stats, bool vs_clips = false,
                                                  int pause_frames = kPauseFrames);

}  // namespace warbler
