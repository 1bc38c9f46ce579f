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

#include "warbler/score.h"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "warbler/error.h"
#include "warbler/phonemes.h"

namespace warbler {

namespace pt = boost::property_tree;

std::string_view SlurFlagName(SlurFlag flag) {
  switch (flag) {
    case SlurFlag::kNull: return "null";
    case SlurFlag::kStart: return "start";
    case SlurFlag::kContinue: return "continue";
    case SlurFlag::kStop: return "stop";
  }
  return "null";
}

SlurFlag SlurFlagFromName(std::string_view name) {
  if (name == "null") return SlurFlag::kNull;
  if (name == "start") return SlurFlag::kStart;
  if (name == "continue") return SlurFlag::kContinue;
  if (name == "stop") return SlurFlag::kStop;
  throw Error(ErrorKind::kValidation,
              "unknown slur flag '" + std::string(name) + "'");
}

std::string_view PhonemeTypeName(PhonemeType type) {
  switch (type) {
    case PhonemeType::kInitial: return "initial";
    case PhonemeType::kFinal: return "final";
    case PhonemeType::kSingleFinal: return "single_final";
    case PhonemeType::kSilence: return "silence";
  }
  return "silence";
}

// ---------------------------------------------------------------------------
// Lexicon

Lexicon Lexicon::Parse(std::string_view text) {
  Lexicon lexicon;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw Error(ErrorKind::kParse,
                  "lexicon line " + std::to_string(line_no) +
                      ": expected 'hanzi<TAB>pinyin'");
    }
    lexicon.Add(line.substr(0, tab), line.substr(tab + 1));
  }
  return lexicon;
}

Lexicon Lexicon::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open lexicon " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Parse(buffer.str());
}

void Lexicon::Add(std::string hanzi, std::string pinyin) {
  entries_.insert_or_assign(std::move(hanzi), std::move(pinyin));
}

std::optional<std::string> Lexicon::Lookup(std::string_view hanzi) const {
  auto it = entries_.find(hanzi);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Pitch, pinyin, frames

NotePitch MidiFromSpn(char step, int alter, int octave) {
  static constexpr int kSemitone[] = {9, 11, 0, 2, 4, 5, 7};  // A..G
  char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(step)));
  if (upper < 'A' || upper > 'G') {
    throw Error(ErrorKind::kValidation,
                std::string("invalid pitch step '") + step + "'");
  }
  if (octave < -1 || octave > 9) {
    throw Error(ErrorKind::kRange,
                "octave " + std::to_string(octave) + " outside [-1, 9]");
  }
  int midi = 12 * (octave + 1) + kSemitone[upper - 'A'] + alter;
  if (midi < 0 || midi > 127) {
    throw Error(ErrorKind::kRange,
                "midi " + std::to_string(midi) + " outside [0, 127]");
  }
  return NotePitch{midi, false};
}

std::string NormalizePinyin(std::string_view syllable) {
  std::string out;
  bool had_tone = false;
  for (std::size_t i = 0; i < syllable.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(syllable[i]);
    // u-umlaut (U+00FC / U+00DC) is written as 'v'.
    if (c == 0xC3 && i + 1 < syllable.size() &&
        (static_cast<unsigned char>(syllable[i + 1]) == 0xBC ||
         static_cast<unsigned char>(syllable[i + 1]) == 0x9C)) {
      out.push_back('v');
      ++i;
      continue;
    }
    if (std::isdigit(c)) {
      had_tone = true;
      continue;
    }
    if (std::isspace(c)) continue;
    if (!std::isalpha(c)) {
      throw Error(ErrorKind::kValidation,
                  "unsupported character in pinyin '" + std::string(syllable) +
                      "'");
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  if (had_tone) {
    Warn("tone digits stripped from '" + std::string(syllable) + "'");
  }
  if (out.size() > 2 && out.back() == 'r' && out != "er") {
    throw Error(ErrorKind::kValidation,
                "erhua/retroflex suffix not supported: '" +
                    std::string(syllable) + "'");
  }
  return out;
}

std::vector<PhonemeUnit> SplitPinyin(std::string_view syllable) {
  if (syllable.empty()) {
    throw Error(ErrorKind::kValidation, "empty pinyin syllable");
  }
  std::string_view best;
  for (auto initial : kInitials) {
    if (syllable.substr(0, initial.size()) == initial &&
        initial.size() > best.size()) {
      best = initial;
    }
  }
  if (best.empty()) {
    return {PhonemeUnit{std::string(syllable), PhonemeType::kSingleFinal}};
  }
  if (best.size() == syllable.size()) {
    throw Error(ErrorKind::kValidation,
                "no final in syllable '" + std::string(syllable) + "'");
  }
  return {PhonemeUnit{std::string(best), PhonemeType::kInitial},
          PhonemeUnit{std::string(syllable.substr(best.size())),
                      PhonemeType::kFinal}};
}

int BeatsToFrames(const Beats& beats, double bpm) {
  if (beats <= 0) {
    throw Error(ErrorKind::kValidation, "beats must be positive");
  }
  if (!(bpm > 0.0) || !std::isfinite(bpm)) {
    throw Error(ErrorKind::kValidation, "bpm must be positive");
  }
  long double seconds = static_cast<long double>(beats.numerator()) * 60.0L /
                        (static_cast<long double>(beats.denominator()) * bpm);
  return static_cast<int>(std::llround(seconds * kFramesPerSecond));
}

// ---------------------------------------------------------------------------
// MusicXML

namespace {

struct NoteContext {
  int measure = 0;
  int note = 0;

  std::string Where() const {
    return "measure " + std::to_string(measure) + ", note " +
           std::to_string(note);
  }
};

std::string Trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> TempoFromDirection(const pt::ptree& direction) {
  if (auto t = direction.get_optional<double>("sound.<xmlattr>.tempo")) {
    return *t;
  }
  for (const auto& [tag, dt] : direction) {
    if (tag != "direction-type") continue;
    auto metronome = dt.get_child_optional("metronome");
    if (!metronome) continue;
    auto per_minute = metronome->get_optional<double>("per-minute");
    if (!per_minute) continue;
    std::string unit = Trim(metronome->get<std::string>("beat-unit", "quarter"));
    double factor = 1.0;
    if (unit == "half") factor = 2.0;
    else if (unit == "eighth") factor = 0.5;
    else if (unit == "whole") factor = 4.0;
    else if (unit == "16th") factor = 0.25;
    if (metronome->get_child_optional("beat-unit-dot")) factor *= 1.5;
    return *per_minute * factor;
  }
  return std::nullopt;
}

class MusicXmlReader {
 public:
  explicit MusicXmlReader(const Lexicon* lexicon) : lexicon_(lexicon) {}

  Score Read(const pt::ptree& doc) {
    auto root = doc.get_child_optional("score-partwise");
    if (!root) {
      throw Error(ErrorKind::kParse,
                  "expected a <score-partwise> document");
    }
    if (auto fields = root->get_child_optional("identification.miscellaneous")) {
      for (const auto& [tag, field] : *fields) {
        if (tag == "miscellaneous-field" &&
            field.get<std::string>("<xmlattr>.name", "") == "singer") {
          score_.singer_id = Trim(field.data());
        }
      }
    }
    auto part = root->get_child_optional("part");
    if (!part) throw Error(ErrorKind::kParse, "score has no <part>");

    for (const auto& [tag, measure] : *part) {
      if (tag != "measure") continue;
      ++ctx_.measure;
      ctx_.note = 0;
      ReadMeasure(measure);
    }
    if (!bpm_) throw Error(ErrorKind::kValidation, "tempo required");
    if (!saw_lyric_) throw Error(ErrorKind::kValidation, "no lyric events");
    score_.bpm = *bpm_;
    return std::move(score_);
  }

 private:
  void SetTempo(double bpm) {
    if (!(bpm > 0.0)) {
      throw Error(ErrorKind::kValidation,
                  "non-positive tempo in measure " +
                      std::to_string(ctx_.measure));
    }
    if (!bpm_) {
      bpm_ = bpm;
    } else if (*bpm_ != bpm) {
      Warn("tempo change in measure " + std::to_string(ctx_.measure) +
           " ignored; a single tempo per score is supported");
    }
  }

  void ReadMeasure(const pt::ptree& measure) {
    if (auto t = measure.get_optional<double>("sound.<xmlattr>.tempo")) {
      SetTempo(*t);
    }
    for (const auto& [tag, child] : measure) {
      if (tag == "attributes") {
        if (auto d = child.get_optional<int>("divisions")) {
          if (*d <= 0) {
            throw Error(ErrorKind::kValidation, "divisions must be positive");
          }
          divisions_ = *d;
        }
      } else if (tag == "direction") {
        if (auto t = TempoFromDirection(child)) SetTempo(*t);
      } else if (tag == "sound") {
        if (auto t = child.get_optional<double>("<xmlattr>.tempo")) SetTempo(*t);
      } else if (tag == "note") {
        ++ctx_.note;
        ReadNote(child);
      } else if (tag == "backup" || tag == "forward") {
        throw Error(ErrorKind::kValidation,
                    "multi-voice content (" + tag + ") in measure " +
                        std::to_string(ctx_.measure) + " is not supported");
      }
    }
  }

  void ReadNote(const pt::ptree& node) {
    if (node.get_child_optional("grace")) {
      Warn("grace note skipped at " + ctx_.Where());
      return;
    }
    if (node.get_child_optional("chord")) {
      throw Error(ErrorKind::kValidation,
                  "chords are not supported (" + ctx_.Where() + ")");
    }
    if (auto voice = node.get_optional<std::string>("voice")) {
      if (Trim(*voice) != "1") {
        throw Error(ErrorKind::kValidation,
                    "only voice 1 is supported (" + ctx_.Where() + ")");
      }
    }
    auto duration = node.get_optional<std::int64_t>("duration");
    if (!duration || *duration <= 0) {
      throw Error(ErrorKind::kValidation,
                  "note without positive duration at " + ctx_.Where());
    }

    Note note;
    note.beats = Beats(*duration, divisions_);
    bool is_rest = static_cast<bool>(node.get_child_optional("rest"));
    if (is_rest) {
      note.pitch = NotePitch::Rest();
    } else {
      auto pitch = node.get_child_optional("pitch");
      if (!pitch) {
        throw Error(ErrorKind::kValidation,
                    "note without pitch or rest at " + ctx_.Where());
      }
      std::string step = Trim(pitch->get<std::string>("step", ""));
      if (step.size() != 1) {
        throw Error(ErrorKind::kValidation, "bad <step> at " + ctx_.Where());
      }
      int alter = static_cast<int>(std::lround(pitch->get<double>("alter", 0.0)));
      int octave = pitch->get<int>("octave", 4);
      note.pitch = MidiFromSpn(step[0], alter, octave);
    }

    bool tie_stop = false;
    bool slur_start = false, slur_stop = false, slur_continue = false;
    for (const auto& [tag, child] : node) {
      if (tag == "tie" && child.get<std::string>("<xmlattr>.type", "") == "stop") {
        tie_stop = true;
      }
      if (tag != "notations") continue;
      for (const auto& [ntag, mark] : child) {
        std::string type = mark.get<std::string>("<xmlattr>.type", "");
        if (ntag == "tied" && type == "stop") tie_stop = true;
        if (ntag == "slur") {
          if (type == "start") slur_start = true;
          else if (type == "stop") slur_stop = true;
          else if (type == "continue") slur_continue = true;
        }
      }
    }
    if (slur_continue || (slur_start && slur_stop)) {
      note.slur = SlurFlag::kContinue;
    } else if (slur_start) {
      note.slur = SlurFlag::kStart;
      slur_open_ = true;
    } else if (slur_stop) {
      note.slur = SlurFlag::kStop;
      slur_open_ = false;
    } else if (slur_open_) {
      note.slur = SlurFlag::kContinue;
    }
    note.tied_from_prev = tie_stop;

    std::optional<std::string> lyric;
    if (auto text = node.get_optional<std::string>("lyric.text")) {
      std::string t = Trim(*text);
      if (!t.empty()) lyric = t;
    }

    if (is_rest) {
      if (lyric) {
        throw Error(ErrorKind::kValidation,
                    "lyric on a rest at " + ctx_.Where());
      }
      if (!score_.events.empty() && score_.events.back().is_silence()) {
        score_.events.back().notes[0].beats += note.beats;
      } else {
        note.slur = SlurFlag::kNull;
        score_.events.push_back(SyllableEvent{"", {note}});
      }
      return;
    }

    if (tie_stop && !score_.events.empty() &&
        !score_.events.back().is_silence()) {
      Note& prev = score_.events.back().notes.back();
      if (prev.pitch == note.pitch) {
        if (lyric) Warn("lyric on tied continuation ignored at " + ctx_.Where());
        prev.beats += note.beats;
        if (note.slur == SlurFlag::kStop) prev.slur = SlurFlag::kStop;
        return;
      }
      Warn("tie between different pitches treated as a new note at " +
           ctx_.Where());
    }

    if (lyric) {
      saw_lyric_ = true;
      std::string pinyin = *lyric;
      if (lexicon_) {
        if (auto mapped = lexicon_->Lookup(*lyric)) pinyin = *mapped;
      }
      bool ascii = true;
      for (unsigned char c : pinyin) {
        if (c >= 0x80) ascii = false;
      }
      if (!ascii && pinyin.find("\xC3\xBC") == std::string::npos) {
        throw Error(ErrorKind::kValidation,
                    "no lexicon entry for lyric '" + *lyric + "' at " +
                        ctx_.Where());
      }
      score_.events.push_back(SyllableEvent{NormalizePinyin(pinyin), {note}});
      return;
    }

    // Melisma: a pitched note without a new lyric extends the last syllable.
    if (score_.events.empty() || score_.events.back().is_silence()) {
      throw Error(ErrorKind::kValidation,
                  "pitched note without lyric and no preceding syllable at " +
                      ctx_.Where());
    }
    score_.events.back().notes.push_back(note);
  }

  const Lexicon* lexicon_;
  Score score_;
  std::optional<double> bpm_;
  std::int64_t divisions_ = 1;
  bool slur_open_ = false;
  bool saw_lyric_ = false;
  NoteContext ctx_;
};

}  // namespace

Score ParseMusicXml(std::string_view document, const Lexicon* lexicon) {
  pt::ptree doc;
  std::istringstream in{std::string(document)};
  try {
    pt::read_xml(in, doc, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorKind::kParse, "malformed XML at line " +
                                       std::to_string(e.line()) + ": " +
                                       e.message());
  }
  try {
    return MusicXmlReader(lexicon).Read(doc);
  } catch (const pt::ptree_bad_data& e) {
    throw Error(ErrorKind::kParse, std::string("bad MusicXML value: ") + e.what());
  }
}

Score LoadMusicXml(const std::string& path, const Lexicon* lexicon) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open score " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseMusicXml(buffer.str(), lexicon);
}

}  // namespace warbler
