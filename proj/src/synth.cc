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

#include "warbler/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "warbler/error.h"
#include "warbler/nn/params.h"
#include "warbler/phonemes.h"

namespace warbler {

namespace {

constexpr std::string_view kSyllables[] = {
    "ma",   "ba",   "da",    "la",   "na",   "zhang", "chi",  "shi",   "wo",  "ni",
    "hao",  "de",   "ge",    "xin",  "yue",  "tian",  "feng", "yu",    "hua", "lan",
    "qing", "song", "ai",    "an",   "ou",   "ren",   "mei",  "kai",   "liu", "xiang",
    "chun", "qiu",  "yun",   "guang", "ming", "ye",   "shui", "hong",  "jia", "dong"};

// Beat values in halves.
constexpr int kNoteHalves[] = {1, 2, 2, 2, 3, 4};
constexpr int kRestHalves[] = {2, 3, 4};
constexpr double kBpms[] = {90.0, 100.0, 110.0, 120.0};

// Offset between the annotation timeline and the rendered audio, so that
// analysis frame f is centred on the middle of annotation frame f.
constexpr int kLeadSamples = 120;
constexpr int kHop = 240;

struct ConsonantTiming {
  std::string_view initial;
  int base_frames;
};

constexpr ConsonantTiming kConsonants[] = {
    {"b", 4},  {"p", 6},   {"m", 7},  {"f", 11}, {"d", 4},   {"t", 6},  {"n", 7},
    {"l", 7},  {"g", 5},   {"k", 7},  {"h", 12}, {"j", 9},   {"q", 11}, {"x", 13},
    {"zh", 9}, {"ch", 11}, {"sh", 14}, {"r", 8}, {"z", 9},   {"c", 11}, {"s", 14}};

int ConsonantBase(std::string_view initial) {
  for (const auto& c : kConsonants) {
    if (c.initial == initial) return c.base_frames;
  }
  return 6;
}

bool IsVoicedInitial(std::string_view p) {
  return p == "m" || p == "n" || p == "l" || p == "r" || p == "b" || p == "d" || p == "g";
}

double NoiseCenterHz(std::string_view p) {
  static const std::pair<std::string_view, double> table[] = {
      {"s", 5500}, {"sh", 3500}, {"x", 4000}, {"c", 5000}, {"z", 5000}, {"zh", 3000},
      {"ch", 3200}, {"j", 3800}, {"q", 4200}, {"h", 1500}, {"f", 4500}, {"p", 2000},
      {"t", 4000}, {"k", 2500}};
  for (const auto& [name, hz] : table) {
    if (name == p) return hz;
  }
  return 3000.0;
}

std::array<double, 3> VowelFormants(std::string_view fin) {
  char nucleus = 'a';
  if (fin.size() >= 2 && fin[0] == 'y' && fin[1] == 'u') {
    nucleus = 'v';
  } else if (fin.find('a') != std::string_view::npos) {
    nucleus = 'a';
  } else if (fin.find('o') != std::string_view::npos) {
    nucleus = 'o';
  } else if (fin.find('e') != std::string_view::npos) {
    nucleus = 'e';
  } else {
    nucleus = fin.back();
  }
  switch (nucleus) {
    case 'a': return {800, 1300, 2600};
    case 'o': return {500, 900, 2500};
    case 'e': return {550, 1700, 2600};
    case 'i': return {300, 2300, 3000};
    case 'u': return {350, 750, 2400};
    case 'v': return {300, 1900, 2600};
    default: return {500, 1500, 2500};
  }
}

struct Resonator {
  double y1 = 0.0, y2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  void Set(double hz, double bw) {
    const double r = std::exp(-std::numbers::pi * bw / kSampleRate);
    a1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * hz / kSampleRate);
    a2 = -r * r;
  }
  double Step(double x) {
    const double y = x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

std::string SpellPitch(int midi, std::string& step, int& alter, int& octave) {
  static const char* steps[] = {"C", "C", "D", "D", "E", "F", "F", "G", "G", "A", "A", "B"};
  static const int alters[] = {0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0};
  step = steps[midi % 12];
  alter = alters[midi % 12];
  octave = midi / 12 - 1;
  return step;
}

Score RandomScore(nn::Rng& rng, const SynthCorpusOptions& o, int singer_index,
                  const std::string& singer_id) {
  Score score;
  score.bpm = kBpms[rng.UniformInt(4)];
  score.singer_id = singer_id;
  auto rest = [&score](int halves) {
    SyllableEvent ev;
    ev.notes.push_back(Note{NotePitch::Rest(), Beats(halves, 2)});
    score.events.push_back(ev);
  };
  rest(2);
  int midi = (o.min_midi + o.max_midi) / 2;
  auto next_pitch = [&]() {
    midi += rng.UniformInt(5) - 2;
    midi = std::clamp(midi, o.min_midi, o.max_midi);
    return NotePitch{midi, false};
  };
  const int phrases = o.min_phrases + rng.UniformInt(o.max_phrases - o.min_phrases + 1);
  for (int p = 0; p < phrases; ++p) {
    const int n = o.min_syllables + rng.UniformInt(o.max_syllables - o.min_syllables + 1);
    const bool legato = singer_index == 0 && n >= 2 && rng.Uniform() < o.legato_probability;
    for (int s = 0; s < n; ++s) {
      SyllableEvent ev;
      ev.pinyin = std::string(kSyllables[rng.UniformInt(std::size(kSyllables))]);
      const bool melisma = !legato && rng.Uniform() < o.melisma_probability;
      const int notes = melisma ? 2 : 1;
      for (int k = 0; k < notes; ++k) {
        Note note;
        note.pitch = next_pitch();
        note.beats = Beats(kNoteHalves[rng.UniformInt(std::size(kNoteHalves))], 2);
        if (melisma) note.slur = k == 0 ? SlurFlag::kStart : SlurFlag::kStop;
        ev.notes.push_back(note);
      }
      if (legato) {
        ev.notes[0].slur = s == 0 ? SlurFlag::kStart
                                  : (s + 1 == n ? SlurFlag::kStop : SlurFlag::kContinue);
      }
      score.events.push_back(ev);
    }
    rest(kRestHalves[rng.UniformInt(std::size(kRestHalves))]);
  }
  return score;
}

// Sung timing: syllable boundaries drift from the score by a few frames and
// initials take a consonant-specific length rather than half the note.
std::vector<int> SungDurations(const std::vector<PhonemeRow>& rows, nn::Rng& rng) {
  auto ranges = SyllableRanges(rows);
  std::vector<int> bounds = {0};
  for (const auto& [b, e] : ranges) {
    int len = 0;
    for (int i = b; i < e; ++i) len += rows[i].nominal_dur;
    bounds.push_back(bounds.back() + len);
  }
  for (std::size_t k = 1; k + 1 < bounds.size(); ++k) bounds[k] += rng.UniformInt(3) - 1;

  std::vector<int> gt(rows.size());
  for (std::size_t s = 0; s < ranges.size(); ++s) {
    const auto [b, e] = ranges[s];
    const int total = bounds[s + 1] - bounds[s];
    if (rows[b].is_silence()) {
      gt[b] = total;
      continue;
    }
    // Note regions: each final row starts a note, except that the first note
    // also holds the initial.
    std::vector<int> note_rows, note_frames;
    int nominal_total = 0;
    for (int i = b; i < e; ++i) {
      if (rows[i].pt == PhonemeType::kInitial) continue;
      note_rows.push_back(i);
      note_frames.push_back(rows[i].bt);
      nominal_total += rows[i].bt;
    }
    std::vector<int> region(note_rows.size());
    int acc = 0, used = 0;
    for (std::size_t k = 0; k < note_rows.size(); ++k) {
      acc += note_frames[k];
      int end = static_cast<int>(std::llround(static_cast<double>(acc) * total / nominal_total));
      if (k + 1 < note_rows.size()) end += rng.UniformInt(7) - 3;
      else end = total;
      region[k] = end - used;
      used = end;
    }
    for (std::size_t k = 0; k < note_rows.size(); ++k) gt[note_rows[k]] = region[k];
    if (rows[b].pt == PhonemeType::kInitial) {
      const int base = ConsonantBase(PhonemeById(rows[b].ph));
      const int init = std::clamp(base + rng.UniformInt(7) - 3, 2, region[0] - 3);
      gt[b] = init;
      gt[note_rows[0]] = region[0] - init;
    }
  }
  return gt;
}

}  // namespace

std::string WriteMusicXml(const Score& score) {
  constexpr int kDivisions = 4;
  std::ostringstream x;
  x << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<score-partwise version=\"3.1\">\n";
  if (score.singer_id) {
    x << "  <identification>\n    <miscellaneous>\n"
      << "      <miscellaneous-field name=\"singer\">" << *score.singer_id
      << "</miscellaneous-field>\n    </miscellaneous>\n  </identification>\n";
  }
  x << "  <part-list>\n    <score-part id=\"P1\"><part-name>Voice</part-name></score-part>\n"
    << "  </part-list>\n  <part id=\"P1\">\n    <measure number=\"1\">\n"
    << "      <attributes><divisions>" << kDivisions << "</divisions></attributes>\n";
  std::ostringstream bpm;
  bpm.precision(17);
  bpm << score.bpm;
  x << "      <sound tempo=\"" << bpm.str() << "\"/>\n";
  int measure = 1;
  for (std::size_t e = 0; e < score.events.size(); ++e) {
    const auto& ev = score.events[e];
    for (std::size_t k = 0; k < ev.notes.size(); ++k) {
      const Note& note = ev.notes[k];
      const Beats dur = note.beats * kDivisions;
      if (dur.denominator() != 1) {
        throw Error(ErrorKind::kValidation, "note length not representable in quarter/4 units");
      }
      x << "      <note>";
      if (note.pitch.rest) {
        x << "<rest/>";
      } else {
        std::string step;
        int alter = 0, octave = 0;
        SpellPitch(note.pitch.midi, step, alter, octave);
        x << "<pitch><step>" << step << "</step>";
        if (alter != 0) x << "<alter>" << alter << "</alter>";
        x << "<octave>" << octave << "</octave></pitch>";
      }
      x << "<duration>" << dur.numerator() << "</duration><voice>1</voice>";
      const char* mark = note.slur == SlurFlag::kStart  ? "start"
                         : note.slur == SlurFlag::kStop ? "stop"
                                                        : nullptr;
      if (mark) x << "<notations><slur type=\"" << mark << "\"/></notations>";
      if (k == 0 && !ev.is_silence()) x << "<lyric><text>" << ev.pinyin << "</text></lyric>";
      x << "</note>\n";
    }
    if (ev.is_silence() && e + 1 < score.events.size() && e > 0) {
      x << "    </measure>\n    <measure number=\"" << ++measure << "\">\n";
    }
  }
  x << "    </measure>\n  </part>\n</score-partwise>\n";
  return x.str();
}

Waveform RenderSinging(const std::vector<PhonemeRow>& rows,
                       const std::vector<IntervalEntry>& intervals, int singer_index,
                       std::uint64_t seed) {
  if (rows.size() != intervals.size()) {
    throw Error(ErrorKind::kShape, "render: rows and intervals differ in length");
  }
  nn::Rng rng(seed);
  const int total_frames =
      intervals.empty() ? 0 : static_cast<int>(std::llround(intervals.back().end * 100.0));
  Waveform w;
  w.sample_rate = kSampleRate;
  w.samples.assign(static_cast<std::size_t>(total_frames) * kHop + 2 * kLeadSamples, 0.0);
  for (double& s : w.samples) s = 1e-4 * rng.Uniform(-1.0, 1.0);

  const double timbre = 1.0 + 0.1 * singer_index;
  double phase = 0.0;
  Resonator res[3];
  std::vector<double> seg;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const int f0 = static_cast<int>(std::llround(intervals[i].start * 100.0));
    const int f1 = static_cast<int>(std::llround(intervals[i].end * 100.0));
    const std::size_t begin = static_cast<std::size_t>(f0) * kHop + kLeadSamples;
    const std::size_t len = static_cast<std::size_t>(f1 - f0) * kHop;
    if (row.is_silence() || len == 0) continue;
    const std::string_view name = PhonemeById(row.ph);
    const bool noise = row.pt == PhonemeType::kInitial && !IsVoicedInitial(name);
    double target_rms;
    if (noise) {
      res[0].Set(NoiseCenterHz(name) * timbre, 600.0);
      res[1].Set(NoiseCenterHz(name) * timbre * 1.3, 900.0);
      res[2].Set(NoiseCenterHz(name) * timbre * 0.7, 900.0);
      target_rms = 0.04;
    } else {
      std::array<double, 3> f = row.pt == PhonemeType::kInitial
                                    ? std::array<double, 3>{280, 1150, 2500}
                                    : VowelFormants(name);
      for (int k = 0; k < 3; ++k) res[k].Set(f[k] * timbre, 80.0 + 20.0 * k);
      target_rms = row.pt == PhonemeType::kInitial ? 0.08 : 0.15;
    }
    const double hz = 440.0 * std::pow(2.0, (row.pi.midi - 69) / 12.0);
    seg.assign(len, 0.0);
    for (std::size_t n = 0; n < len; ++n) {
      double x;
      if (noise) {
        x = rng.Uniform(-1.0, 1.0);
      } else {
        x = 2.0 * phase - 1.0;
        phase += hz / kSampleRate;
        if (phase >= 1.0) phase -= 1.0;
      }
      for (auto& r : res) x = r.Step(x);
      seg[n] = x;
    }
    double sq = 0.0;
    for (double v : seg) sq += v * v;
    const double gain = sq > 0.0 ? target_rms / std::sqrt(sq / len) : 0.0;
    for (std::size_t n = 0; n < len; ++n) w.samples[begin + n] = seg[n] * gain;
  }
  for (double& s : w.samples) s = std::clamp(s, -1.0, 1.0);
  return w;
}

std::vector<SynthSong> GenerateSynthCorpus(const SynthCorpusOptions& o) {
  if (o.singers < 1 || o.songs < 1) {
    throw Error(ErrorKind::kConfig, "synthetic corpus needs at least one singer and song");
  }
  if (o.min_phrases < 1 || o.max_phrases < o.min_phrases || o.min_syllables < 1 ||
      o.max_syllables < o.min_syllables || o.min_midi < 0 || o.max_midi > 127 ||
      o.max_midi < o.min_midi) {
    throw Error(ErrorKind::kConfig, "invalid synthetic corpus ranges");
  }
  std::vector<SynthSong> songs;
  for (int s = 0; s < o.songs; ++s) {
    SynthSong song;
    song.singer_index = s % o.singers;
    song.singer_id = "singer" + std::to_string(song.singer_index);
    char id[64];
    std::snprintf(id, sizeof(id), "song%03d_%s", s, song.singer_id.c_str());
    song.id = id;
    nn::Rng rng(o.seed * 1000003ULL + static_cast<std::uint64_t>(s) * 7919ULL + 17ULL);
    song.score = RandomScore(rng, o, song.singer_index, song.singer_id);
    auto rows = BuildRows(song.score);
    auto gt = SungDurations(rows, rng);
    int pos = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string label(PhonemeById(rows[i].ph));
      song.intervals.push_back({pos / 100.0, (pos + gt[i]) / 100.0, label});
      pos += gt[i];
    }
    if (o.render_audio) {
      song.audio = RenderSinging(rows, song.intervals, song.singer_index, rng.NextU64());
    }
    songs.push_back(std::move(song));
  }
  return songs;
}

std::string WriteSynthCorpus(const std::string& dir, const SynthCorpusOptions& options) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  for (const char* sub : {"scores", "intervals", "wav"}) {
    fs::create_directories(root / sub, ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create " + (root / sub).string());
  }
  auto songs = GenerateSynthCorpus(options);
  std::string manifest;
  auto write_text = [](const fs::path& p, const std::string& text) {
    FILE* f = std::fopen(p.string().c_str(), "wb");
    if (!f) throw Error(ErrorKind::kIo, "cannot write " + p.string());
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  };
  for (const auto& song : songs) {
    const std::string score = "scores/" + song.id + ".xml";
    const std::string intervals = "intervals/" + song.id + ".tsv";
    const std::string wav = "wav/" + song.id + ".wav";
    write_text(root / score, WriteMusicXml(song.score));
    write_text(root / intervals, FormatIntervals(song.intervals));
    if (options.render_audio) WriteWav((root / wav).string(), song.audio);
    nlohmann::ordered_json j = {{"id", song.id},
                                {"singer", song.singer_id},
                                {"score", score},
                                {"intervals", intervals}};
    if (options.render_audio) j["wav"] = wav;
    manifest += j.dump() + "\n";
  }
  const fs::path manifest_path = root / "manifest.jsonl";
  write_text(manifest_path, manifest);
  return manifest_path.string();
}

}  // namespace warbler
