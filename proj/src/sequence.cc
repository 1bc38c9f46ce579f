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

#include "warbler/sequence.h"

#include <cmath>
#include <map>
#include <sstream>

#include "binary_io.h"
#include "warbler/error.h"
#include "warbler/phonemes.h"

namespace warbler {

namespace {

constexpr std::string_view kRowsMagic = "WSROWS1";
constexpr double kContiguityEps = 1e-6;

int SecondsToFrame(double seconds) {
  return static_cast<int>(std::llround(seconds * kFramesPerSecond));
}

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

double ParseSeconds(const std::string& field, int line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(field, &used);
    if (used != field.size() || !std::isfinite(v)) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kParse, "bad time '" + field + "' at line " +
                                       std::to_string(line_no));
  }
}

}  // namespace

int PhonemeRow::pitch_id() const { return pi.rest ? kRestPitchId : pi.midi; }

std::vector<SyllableRange> SyllableRanges(const std::vector<PhonemeRow>& rows) {
  std::vector<SyllableRange> ranges;
  int n = static_cast<int>(rows.size());
  int begin = 0;
  for (int i = 1; i <= n; ++i) {
    if (i == n || rows[i].syllable_index != rows[begin].syllable_index) {
      ranges.emplace_back(begin, i);
      begin = i;
    }
  }
  return ranges;
}

// ---------------------------------------------------------------------------
// Intervals

std::vector<IntervalEntry> ParseIntervals(std::string_view text) {
  std::vector<IntervalEntry> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = SplitTabs(line);
    if (fields.size() != 3 || fields[2].empty()) {
      throw Error(ErrorKind::kParse, "expected 'start<TAB>end<TAB>label' at line " +
                                         std::to_string(line_no));
    }
    IntervalEntry entry{ParseSeconds(fields[0], line_no),
                        ParseSeconds(fields[1], line_no), fields[2]};
    if (entry.start < 0.0) {
      throw Error(ErrorKind::kValidation,
                  "negative start time at line " + std::to_string(line_no));
    }
    if (entry.end < entry.start) {
      throw Error(ErrorKind::kValidation,
                  "negative duration at line " + std::to_string(line_no));
    }
    if (entry.end == entry.start) {
      throw Error(ErrorKind::kValidation,
                  "empty interval at line " + std::to_string(line_no));
    }
    if (IsSilenceLabel(entry.label)) entry.label = std::string(kSilencePhoneme);
    if (!out.empty()) {
      double prev_end = out.back().end;
      if (entry.start < prev_end - kContiguityEps) {
        throw Error(ErrorKind::kValidation,
                    "overlapping interval at line " + std::to_string(line_no));
      }
      if (entry.start > prev_end + kContiguityEps) {
        out.push_back({prev_end, entry.start, std::string(kSilencePhoneme)});
      } else {
        entry.start = prev_end;
      }
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<IntervalEntry> LoadIntervals(const std::string& path) {
  return ParseIntervals(io::ReadFile(path));
}

std::string FormatIntervals(const std::vector<IntervalEntry>& entries) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  for (const auto& e : entries) {
    out << e.start << '\t' << e.end << '\t' << e.label << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Rows

std::vector<PhonemeRow> BuildRows(const Score& score) {
  std::vector<PhonemeRow> rows;
  int syllable = 0;
  for (const auto& event : score.events) {
    if (event.notes.empty()) {
      throw Error(ErrorKind::kValidation, "syllable event without notes");
    }
    std::vector<int> frames;
    for (const auto& note : event.notes) {
      int f = BeatsToFrames(note.beats, score.bpm);
      if (f < 1) {
        throw Error(ErrorKind::kValidation,
                    "note shorter than one frame in syllable " +
                        std::to_string(syllable));
      }
      frames.push_back(f);
    }

    if (event.is_silence()) {
      PhonemeRow row;
      row.ph = PhonemeId(kSilencePhoneme);
      row.pt = PhonemeType::kSilence;
      row.bt = frames[0];
      row.nominal_dur = frames[0];
      row.syllable_index = syllable++;
      rows.push_back(row);
      continue;
    }
    for (const auto& note : event.notes) {
      if (note.pitch.rest) {
        throw Error(ErrorKind::kValidation, "rest inside a sung syllable");
      }
    }

    auto units = SplitPinyin(event.pinyin);
    for (const auto& u : units) PhonemeId(u.phoneme);
    const PhonemeUnit* initial = units.size() == 2 ? &units[0] : nullptr;
    const PhonemeUnit& final_unit = units.back();
    const bool melisma = event.notes.size() > 1;

    auto note_slur = [&](std::size_t k) {
      if (!melisma) return event.notes[k].slur;
      if (k == 0) return SlurFlag::kStart;
      if (k + 1 == event.notes.size()) return SlurFlag::kStop;
      return SlurFlag::kContinue;
    };

    for (std::size_t k = 0; k < event.notes.size(); ++k) {
      const Note& note = event.notes[k];
      int d = frames[k];
      int final_dur = d;
      if (k == 0 && initial) {
        if (d < 2) {
          throw Error(ErrorKind::kValidation,
                      "note of " + std::to_string(d) +
                          " frame cannot hold initial and final of '" +
                          event.pinyin + "'");
        }
        int init_dur = static_cast<int>(std::lround(d / 2.0));
        PhonemeRow row;
        row.ph = PhonemeId(initial->phoneme);
        row.pt = PhonemeType::kInitial;
        row.pi = note.pitch;
        row.sr = note_slur(0);
        row.bt = d;
        row.nominal_dur = init_dur;
        row.syllable_index = syllable;
        rows.push_back(row);
        final_dur = d - init_dur;
      }
      PhonemeRow row;
      row.ph = PhonemeId(final_unit.phoneme);
      row.pt = final_unit.type;
      row.pi = note.pitch;
      row.sr = note_slur(k);
      row.bt = d;
      row.nominal_dur = final_dur;
      row.syllable_index = syllable;
      rows.push_back(row);
    }
    ++syllable;
  }
  return rows;
}

std::vector<PhonemeRow> AttachGroundTruth(
    std::vector<PhonemeRow> rows, const std::vector<IntervalEntry>& intervals,
    double silence_merge_seconds) {
  std::vector<IntervalEntry> kept;
  std::optional<double> pending_start;  // short leading silence
  for (const auto& entry : intervals) {
    bool short_silence = IsSilenceLabel(entry.label) &&
                         entry.end - entry.start < silence_merge_seconds;
    if (short_silence) {
      if (!kept.empty()) {
        kept.back().end = entry.end;
      } else if (!pending_start) {
        pending_start = entry.start;
      }
      continue;
    }
    kept.push_back(entry);
    if (pending_start) {
      kept.back().start = *pending_start;
      pending_start.reset();
    }
  }

  std::size_t common = std::min(rows.size(), kept.size());
  for (std::size_t i = 0; i < common; ++i) {
    std::string_view expected = PhonemeById(rows[i].ph);
    const std::string& got = kept[i].label;
    bool match = rows[i].is_silence() ? IsSilenceLabel(got) : got == expected;
    if (!match) {
      throw Error(ErrorKind::kAlignment,
                  "alignment mismatch at index " + std::to_string(i) +
                      ": row '" + std::string(expected) + "' vs interval '" +
                      got + "'");
    }
  }
  if (rows.size() != kept.size()) {
    throw Error(ErrorKind::kAlignment,
                "count mismatch: " + std::to_string(rows.size()) + " rows vs " +
                    std::to_string(kept.size()) + " intervals");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].gt_dur = SecondsToFrame(kept[i].end) - SecondsToFrame(kept[i].start);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization

std::string EncodeRows(const Utterance& utt) {
  io::ByteWriter w;
  w.Raw(kRowsMagic);
  w.U32(static_cast<std::uint32_t>(kPhonemeVocabVersion));
  w.Str(utt.id);
  w.Str(utt.singer_id);
  w.F64(utt.span_start);
  w.F64(utt.span_end);
  w.U32(static_cast<std::uint32_t>(utt.rows.size()));
  for (const auto& r : utt.rows) w.I32(r.ph);
  for (const auto& r : utt.rows) w.I32(static_cast<int>(r.pt));
  for (const auto& r : utt.rows) w.I32(r.pi.rest ? -1 : r.pi.midi);
  for (const auto& r : utt.rows) w.I32(static_cast<int>(r.sr));
  for (const auto& r : utt.rows) w.I32(r.bt);
  for (const auto& r : utt.rows) w.I32(r.nominal_dur);
  for (const auto& r : utt.rows) w.I32(r.gt_dur ? *r.gt_dur : -1);
  for (const auto& r : utt.rows) w.I32(r.syllable_index);
  return w.bytes();
}

Utterance DecodeRows(std::string_view bytes) {
  io::ByteReader r(bytes, "rows file");
  r.Expect(kRowsMagic);
  auto version = r.U32();
  if (version != static_cast<std::uint32_t>(kPhonemeVocabVersion)) {
    throw Error(ErrorKind::kParse,
                "rows file vocabulary version " + std::to_string(version) +
                    " is not supported");
  }
  Utterance utt;
  utt.id = r.Str();
  utt.singer_id = r.Str();
  utt.span_start = r.F64();
  utt.span_end = r.F64();
  std::uint32_t n = r.U32();
  utt.rows.resize(n);
  for (auto& row : utt.rows) {
    row.ph = r.I32();
    PhonemeById(row.ph);
  }
  for (auto& row : utt.rows) {
    int v = r.I32();
    if (v < 0 || v >= kPhonemeTypeCount) {
      throw Error(ErrorKind::kParse, "bad phoneme type in rows file");
    }
    row.pt = static_cast<PhonemeType>(v);
  }
  for (auto& row : utt.rows) {
    int v = r.I32();
    row.pi = v < 0 ? NotePitch::Rest() : NotePitch{v, false};
  }
  for (auto& row : utt.rows) {
    int v = r.I32();
    if (v < 0 || v >= kSlurCount) {
      throw Error(ErrorKind::kParse, "bad slur flag in rows file");
    }
    row.sr = static_cast<SlurFlag>(v);
  }
  for (auto& row : utt.rows) row.bt = r.I32();
  for (auto& row : utt.rows) row.nominal_dur = r.I32();
  for (auto& row : utt.rows) {
    int v = r.I32();
    if (v >= 0) row.gt_dur = v;
  }
  for (auto& row : utt.rows) row.syllable_index = r.I32();
  if (!r.done()) throw Error(ErrorKind::kParse, "rows file: trailing bytes");
  return utt;
}

void WriteRowsFile(const std::string& path, const Utterance& utt) {
  io::WriteFile(path, EncodeRows(utt));
}

Utterance ReadRowsFile(const std::string& path) {
  return DecodeRows(io::ReadFile(path));
}

std::string RowsToTsv(const Utterance& utt, const std::vector<int>* durations) {
  if (durations && durations->size() != utt.rows.size()) {
    throw Error(ErrorKind::kShape, "durations/rows length mismatch");
  }
  std::ostringstream out;
  out << "# utterance_id=" << utt.id << "\tsinger_id=" << utt.singer_id
      << "\tspan_start=" << utt.span_start << "\tspan_end=" << utt.span_end
      << '\n';
  out << "index\tphoneme\tptype\tmidi\tslur\tbt\tnominal\tgt\tsyllable";
  if (durations) out << "\tdur";
  out << '\n';
  for (std::size_t i = 0; i < utt.rows.size(); ++i) {
    const auto& r = utt.rows[i];
    out << i << '\t' << PhonemeById(r.ph) << '\t' << PhonemeTypeName(r.pt)
        << '\t' << (r.pi.rest ? std::string("rest") : std::to_string(r.pi.midi))
        << '\t' << SlurFlagName(r.sr) << '\t' << r.bt << '\t' << r.nominal_dur
        << '\t' << (r.gt_dur ? std::to_string(*r.gt_dur) : std::string("-"))
        << '\t' << r.syllable_index;
    if (durations) out << '\t' << (*durations)[i];
    out << '\n';
  }
  return out.str();
}

Utterance RowsFromTsv(std::string_view text, std::vector<int>* durations) {
  static const std::map<std::string, PhonemeType> kTypes = {
      {"initial", PhonemeType::kInitial},
      {"final", PhonemeType::kFinal},
      {"single_final", PhonemeType::kSingleFinal},
      {"silence", PhonemeType::kSilence}};
  Utterance utt;
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> header;
  int line_no = 0;
  if (durations) durations->clear();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      for (const auto& field : SplitTabs(line.substr(line.find_first_not_of("# ")))) {
        auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        std::string key = field.substr(0, eq), value = field.substr(eq + 1);
        if (key == "utterance_id") utt.id = value;
        else if (key == "singer_id") utt.singer_id = value;
        else if (key == "span_start") utt.span_start = std::stod(value);
        else if (key == "span_end") utt.span_end = std::stod(value);
      }
      continue;
    }
    auto fields = SplitTabs(line);
    if (header.empty()) {
      header = fields;
      continue;
    }
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::kParse,
                  "rows TSV: wrong column count at line " + std::to_string(line_no));
    }
    std::map<std::string, std::string> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = fields[i];
    try {
      PhonemeRow r;
      r.ph = PhonemeId(col.at("phoneme"));
      auto type = kTypes.find(col.at("ptype"));
      if (type == kTypes.end()) throw Error(ErrorKind::kParse, "bad ptype");
      r.pt = type->second;
      r.pi = col.at("midi") == "rest" ? NotePitch::Rest()
                                      : NotePitch{std::stoi(col.at("midi")), false};
      r.sr = SlurFlagFromName(col.at("slur"));
      r.bt = std::stoi(col.at("bt"));
      r.nominal_dur = std::stoi(col.at("nominal"));
      if (col.at("gt") != "-") r.gt_dur = std::stoi(col.at("gt"));
      r.syllable_index = std::stoi(col.at("syllable"));
      if (durations && col.count("dur")) durations->push_back(std::stoi(col.at("dur")));
      utt.rows.push_back(r);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorKind::kParse, "rows TSV: bad value at line " + std::to_string(line_no));
    }
  }
  if (header.empty()) throw Error(ErrorKind::kParse, "rows TSV: missing header");
  return utt;
}

Utterance LoadRows(const std::string& path, std::vector<int>* durations) {
  std::string bytes = io::ReadFile(path);
  if (bytes.compare(0, kRowsMagic.size(), kRowsMagic) == 0) {
    if (durations) durations->clear();
    return DecodeRows(bytes);
  }
  return RowsFromTsv(bytes, durations);
}

}  // namespace warbler
