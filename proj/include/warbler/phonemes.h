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

// Fixed phoneme and feature-id tables. The vocabulary is versioned: ids are
// written into row files and checkpoints, so entries are append-only.

#pragma once

#include <array>
#include <span>
#include <string_view>

namespace warbler {

inline constexpr int kPhonemeVocabVersion = 1;

inline constexpr std::string_view kSilencePhoneme = "sil";

inline constexpr std::array<std::string_view, 21> kInitials = {
    "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h",
    "j", "q", "x", "zh", "ch", "sh", "r", "z", "c", "s"};

bool IsInitial(std::string_view phoneme);
bool IsSilenceLabel(std::string_view label);

/// Number of phoneme ids, including silence.
int PhonemeVocabSize();
/// Throws Error(kValidation) for phonemes outside the table.
int PhonemeId(std::string_view phoneme);
std::string_view PhonemeById(int id);
bool IsKnownPhoneme(std::string_view phoneme);

inline constexpr int kPhonemeTypeCount = 4;
inline constexpr int kSlurCount = 4;
/// Pitch ids are MIDI numbers; rests use the extra id 128.
inline constexpr int kRestPitchId = 128;
inline constexpr int kPitchVocabSize = 129;

}  // namespace warbler
