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

#include "warbler/corpus.h"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "binary_io.h"
#include "warbler/error.h"

namespace warbler {

std::vector<CorpusEntry> ReadCorpusManifest(const std::string& path) {
  namespace fs = std::filesystem;
  const std::string text = io::ReadFile(path);
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&base](const std::string& p) {
    if (p.empty()) return p;
    fs::path q(p);
    return q.is_absolute() ? p : (base / q).string();
  };
  std::vector<CorpusEntry> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      CorpusEntry e;
      e.id = j.at("id");
      e.singer = j.value("singer", "");
      e.score = resolve(j.at("score"));
      e.intervals = resolve(j.at("intervals"));
      e.wav = resolve(j.value("wav", ""));
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::kParse, path + " line " + std::to_string(line_no) + ": " +
                                         ex.what());
    }
  }
  if (entries.empty()) throw Error(ErrorKind::kValidation, path + ": manifest has no entries");
  return entries;
}

Utterance LoadAnnotatedUtterance(const CorpusEntry& entry, const Lexicon* lexicon,
                                 double silence_merge_seconds) {
  Score score = LoadMusicXml(entry.score, lexicon);
  auto intervals = LoadIntervals(entry.intervals);
  Utterance utt;
  utt.id = entry.id;
  utt.singer_id = !entry.singer.empty() ? entry.singer : score.singer_id.value_or("");
  utt.rows = AttachGroundTruth(BuildRows(score), intervals, silence_merge_seconds);
  utt.span_start = intervals.empty() ? 0.0 : intervals.front().start;
  utt.span_end = intervals.empty() ? 0.0 : intervals.back().end;
  return utt;
}

std::vector<std::string> SingerList(const std::vector<CorpusEntry>& entries) {
  std::vector<std::string> singers;
  for (const auto& e : entries) singers.push_back(e.singer);
  std::sort(singers.begin(), singers.end());
  singers.erase(std::unique(singers.begin(), singers.end()), singers.end());
  return singers;
}

int SingerIndex(const std::vector<std::string>& singers, const std::string& singer) {
  auto it = std::find(singers.begin(), singers.end(), singer);
  if (it == singers.end()) throw Error(ErrorKind::kValidation, "unknown singer '" + singer + "'");
  return static_cast<int>(it - singers.begin());
}

std::vector<AnnotatedSong> LoadAnnotatedSongs(const std::vector<CorpusEntry>& entries,
                                              const std::vector<std::string>& singers,
                                              const DspConfig& dsp, const Lexicon* lexicon,
                                              double silence_merge_seconds) {
  std::vector<AnnotatedSong> songs;
  for (const auto& e : entries) {
    if (e.wav.empty()) continue;
    AnnotatedSong s;
    s.utt = LoadAnnotatedUtterance(e, lexicon, silence_merge_seconds);
    s.features = ExtractFeatures(ReadWav(e.wav), dsp);
    s.speaker = SingerIndex(singers, e.singer);
    songs.push_back(std::move(s));
  }
  if (songs.empty()) throw Error(ErrorKind::kValidation, "no corpus entries with audio");
  return songs;
}

NormStats FitSongStats(const std::vector<AnnotatedSong>& songs) {
  std::vector<AcousticFrame> all;
  for (const auto& s : songs) all.insert(all.end(), s.features.begin(), s.features.end());
  return MinMaxFit(all);
}

std::vector<AcousticExample> MakeAcousticExamples(const std::vector<AnnotatedSong>& songs,
                                                  const NormStats& stats, bool vs_clips,
                                                  int pause_frames) {
  std::vector<AcousticExample> out;
  for (const auto& s : songs) {
    auto normalized = Normalize(s.features, stats);
    if (!vs_clips) {
      out.push_back({s.utt, std::move(normalized), s.speaker});
      continue;
    }
    for (const auto& clip : VsAugment(std::span(&s.utt, 1), pause_frames)) {
      const int begin = std::min<int>(clip.start_frame, static_cast<int>(normalized.size()));
      const int end = std::min<int>(clip.end_frame, static_cast<int>(normalized.size()));
      if (end <= begin) continue;
      AcousticExample ex;
      ex.utt = ClipUtterance(s.utt, clip);
      ex.target.assign(normalized.begin() + begin, normalized.begin() + end);
      ex.speaker = s.speaker;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace warbler
