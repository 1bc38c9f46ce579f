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

// Phoneme-level input rows: building them from a score, aligning them with
// annotated interval files, and reading/writing them.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "warbler/score.h"

namespace warbler {

struct IntervalEntry {
  double start = 0.0;
  double end = 0.0;
  std::string label;

  bool operator==(const IntervalEntry&) const = default;
};

/// One phoneme with its model inputs and durations (frames).
struct PhonemeRow {
  int ph = 0;
  PhonemeType pt = PhonemeType::kSilence;
  NotePitch pi = NotePitch::Rest();
  SlurFlag sr = SlurFlag::kNull;
  int bt = 0;
  int nominal_dur = 0;
  std::optional<int> gt_dur;
  int syllable_index = 0;

  int pitch_id() const;
  bool is_silence() const { return pt == PhonemeType::kSilence; }
  bool operator==(const PhonemeRow&) const = default;
};

struct Utterance {
  std::string id;
  std::string singer_id;
  double span_start = 0.0;
  double span_end = 0.0;
  std::vector<PhonemeRow> rows;

  bool operator==(const Utterance&) const = default;
};

/// Contiguous [begin, end) row ranges sharing a syllable index.
using SyllableRange = std::pair<int, int>;
std::vector<SyllableRange> SyllableRanges(const std::vector<PhonemeRow>& rows);

/// Parses "start<TAB>end<TAB>label" lines; gaps between entries become
/// silence entries.
std::vector<IntervalEntry> ParseIntervals(std::string_view text);
std::vector<IntervalEntry> LoadIntervals(const std::string& path);
std::string FormatIntervals(const std::vector<IntervalEntry>& entries);

std::vector<PhonemeRow> BuildRows(const Score& score);

inline constexpr double kDefaultSilenceMergeSeconds = 0.03;

/// Quantizes interval boundaries to frames and stores gt_dur per row.
/// Silences shorter than `silence_merge_seconds` are folded into the
/// preceding interval before matching.
std::vector<PhonemeRow> AttachGroundTruth(
    std::vector<PhonemeRow> rows, const std::vector<IntervalEntry>& intervals,
    double silence_merge_seconds = kDefaultSilenceMergeSeconds);

// Row files. The binary layout is little-endian and columnar, starting with
// the magic "WSROWS1".
void WriteRowsFile(const std::string& path, const Utterance& utt);
Utterance ReadRowsFile(const std::string& path);
std::string EncodeRows(const Utterance& utt);
Utterance DecodeRows(std::string_view bytes);

/// Human-readable TSV. `durations`, if given, adds a "dur" column.
std::string RowsToTsv(const Utterance& utt,
                      const std::vector<int>* durations = nullptr);
/// Parses RowsToTsv output; the "dur" column, if present, is returned in
/// `durations`.
Utterance RowsFromTsv(std::string_view text,
                      std::vector<int>* durations = nullptr);

/// Reads either a binary rows file or a TSV, detected by magic.
Utterance LoadRows(const std::string& path,
                   std::vector<int>* durations = nullptr);

}  // namespace warbler
