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

// Variable-duration segmentation of annotated utterances at pauses, and
// score transposition.
//
// Cut points sit at the midpoint of every pause (a silence row of at least
// kPauseFrames ground-truth frames), so a pause row may be shared by the two
// clips on either side of it. Cuts never fall inside a syllable.

#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "warbler/score.h"
#include "warbler/sequence.h"

namespace warbler {

struct SegmentClass {
  int lower_frames = 0;  // exclusive
  int upper_frames = 0;  // inclusive
  std::string_view name;
};

inline constexpr std::array<SegmentClass, 3> kSegmentClasses = {{
    {0, 500, "0-5"},
    {500, 800, "5-8"},
    {800, 1200, "8-12"},
}};

inline constexpr int kPauseFrames = 10;

enum class ClipFlag { kNone, kOverLength, kUnderLength };
std::string_view ClipFlagName(ClipFlag flag);

struct Clip {
  std::string clip_id;
  std::string utterance_id;
  /// Frame range within the utterance, [start, end).
  int start_frame = 0;
  int end_frame = 0;
  double start_sec = 0.0;
  double end_sec = 0.0;
  /// Rows overlapping the clip, [row_begin, row_end).
  int row_begin = 0;
  int row_end = 0;
  int class_index = 0;
  ClipFlag flag = ClipFlag::kNone;

  int frames() const { return end_frame - start_frame; }
  bool operator==(const Clip&) const = default;
};

/// Frame positions of cut candidates, including 0 and the total length.
/// Every row needs gt_dur.
std::vector<int> DetectCutPoints(const Utterance& utt, int pause_frames = kPauseFrames);

/// Greedy left-to-right accumulation of pause-delimited spans into clips of
/// one class. A span that alone exceeds the upper bound becomes its own
/// over-length clip; an accumulation that cannot reach the lower bound
/// without passing the upper one is merged and flagged over-length; a short
/// remainder at the end joins the previous clip.
std::vector<Clip> Segment(const Utterance& utt, int class_index,
                          int pause_frames = kPauseFrames);

/// All three segmentations of every utterance; ids are
/// "<utterance>_c<class>_<index>".
std::vector<Clip> VsAugment(std::span<const Utterance> corpus, int pause_frames = kPauseFrames);

/// Rows of a clip with boundary pause rows trimmed to the clip.
Utterance ClipUtterance(const Utterance& utt, const Clip& clip);

std::string ClipToJsonLine(const Clip& clip);
Clip ClipFromJsonLine(std::string_view line);
std::string ClipManifest(std::span<const Clip> clips);
std::vector<Clip> ParseClipManifest(std::string_view text);

/// Shifts every pitched note by `semitones`.
Score TransposeScore(const Score& score, int semitones);

}  // namespace warbler
