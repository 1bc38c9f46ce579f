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

// Score ingestion: MusicXML parsing, pitch mapping, pinyin splitting and
// beat-to-frame conversion.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>

namespace warbler {

using Beats = boost::rational<std::int64_t>;

/// Frame unit used everywhere: 10 ms.
inline constexpr double kFramesPerSecond = 100.0;

struct NotePitch {
  int midi = 0;
  bool rest = false;

  static NotePitch Rest() { return NotePitch{0, true}; }
  bool operator==(const NotePitch&) const = default;
};

enum class SlurFlag : int { kNull = 0, kStart = 1, kContinue = 2, kStop = 3 };

std::string_view SlurFlagName(SlurFlag flag);
SlurFlag SlurFlagFromName(std::string_view name);

struct Note {
  NotePitch pitch;
  Beats beats{1};
  SlurFlag slur = SlurFlag::kNull;
  bool tied_from_prev = false;

  bool operator==(const Note&) const = default;
};

/// One lyric syllable and the notes it is sung over. Silence events carry an
/// empty pinyin and a single rest note.
struct SyllableEvent {
  std::string pinyin;
  std::vector<Note> notes;

  bool is_silence() const { return notes.size() == 1 && notes[0].pitch.rest; }
  bool operator==(const SyllableEvent&) const = default;
};

struct Score {
  double bpm = 120.0;
  std::vector<SyllableEvent> events;
  std::optional<std::string> singer_id;

  bool operator==(const Score&) const = default;
};

enum class PhonemeType : int {
  kInitial = 0,
  kFinal = 1,
  kSingleFinal = 2,
  kSilence = 3,
};

std::string_view PhonemeTypeName(PhonemeType type);

struct PhonemeUnit {
  std::string phoneme;
  PhonemeType type = PhonemeType::kSingleFinal;

  bool operator==(const PhonemeUnit&) const = default;
};

/// Maps hanzi lyric text to romanized pinyin.
class Lexicon {
 public:
  Lexicon() = default;

  /// Reads UTF-8 lines of the form "hanzi<TAB>pinyin".
  static Lexicon Parse(std::string_view text);
  static Lexicon Load(const std::string& path);

  void Add(std::string hanzi, std::string pinyin);
  std::optional<std::string> Lookup(std::string_view hanzi) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

/// Parses a part-wise, single-voice MusicXML document. Lyrics are taken as
/// pinyin unless a lexicon maps them.
Score ParseMusicXml(std::string_view document, const Lexicon* lexicon = nullptr);
Score LoadMusicXml(const std::string& path, const Lexicon* lexicon = nullptr);

/// midi = 12 * (octave + 1) + semitone(step) + alter.
NotePitch MidiFromSpn(char step, int alter, int octave);

/// Lower-cases, strips tone digits (with a warning) and rejects erhua.
std::string NormalizePinyin(std::string_view syllable);

/// Longest-prefix split against the 21 standard initials.
std::vector<PhonemeUnit> SplitPinyin(std::string_view syllable);

/// round(beats * 60 / bpm * 100), half away from zero.
int BeatsToFrames(const Beats& beats, double bpm);

}  // namespace warbler
