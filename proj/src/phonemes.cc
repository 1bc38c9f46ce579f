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

#include "warbler/phonemes.h"

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "warbler/error.h"

namespace warbler {

namespace {

// Finals as they are spelled after an initial, followed by the zero-initial
// syllables that split_pinyin returns whole. Append only.
constexpr std::string_view kFinals[] = {
    "a",    "o",    "e",    "i",     "u",    "v",    "ai",   "ei",   "ao",
    "ou",   "an",   "en",   "ang",   "eng",  "ong",  "er",   "ia",   "ie",
    "iao",  "iu",   "ian",  "in",    "iang", "ing",  "iong", "ua",   "uo",
    "uai",  "ui",   "uan",  "un",    "uang", "ue",   "ve",   "yi",   "ya",
    "ye",   "yao",  "you",  "yan",   "yin",  "yang", "ying", "yong", "yo",
    "wu",   "wa",   "wo",   "wai",   "wei",  "wan",  "wen",  "wang", "weng",
    "yu",   "yue",  "yuan", "yun"};

struct Vocab {
  std::vector<std::string_view> by_id;
  std::unordered_map<std::string_view, int> ids;

  Vocab() {
    by_id.push_back(kSilencePhoneme);
    for (auto p : kInitials) by_id.push_back(p);
    for (auto p : kFinals) by_id.push_back(p);
    for (int i = 0; i < static_cast<int>(by_id.size()); ++i) {
      ids.emplace(by_id[i], i);
    }
  }
};

const Vocab& GetVocab() {
  static const Vocab vocab;
  return vocab;
}

}  // namespace

bool IsInitial(std::string_view phoneme) {
  return std::find(kInitials.begin(), kInitials.end(), phoneme) !=
         kInitials.end();
}

bool IsSilenceLabel(std::string_view label) {
  return label == kSilencePhoneme || label == "SP" || label == "AP" ||
         label == "sp" || label == "pau" || label == "silence";
}

int PhonemeVocabSize() { return static_cast<int>(GetVocab().by_id.size()); }

int PhonemeId(std::string_view phoneme) {
  const auto& vocab = GetVocab();
  auto it = vocab.ids.find(phoneme);
  if (it == vocab.ids.end()) {
    throw Error(ErrorKind::kValidation,
                "unknown phoneme '" + std::string(phoneme) + "'");
  }
  return it->second;
}

std::string_view PhonemeById(int id) {
  const auto& vocab = GetVocab();
  if (id < 0 || id >= static_cast<int>(vocab.by_id.size())) {
    throw Error(ErrorKind::kValidation,
                "phoneme id out of range: " + std::to_string(id));
  }
  return vocab.by_id[id];
}

bool IsKnownPhoneme(std::string_view phoneme) {
  return GetVocab().ids.count(phoneme) > 0;
}

}  // namespace warbler
