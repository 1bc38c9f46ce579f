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

#include "warbler/augment.h"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "warbler/error.h"

namespace warbler {

std::string_view ClipFlagName(ClipFlag flag) {
  switch (flag) {
    case ClipFlag::kNone: return "none";
    case ClipFlag::kOverLength: return "over_length";
    case ClipFlag::kUnderLength: return "under_length";
  }
  return "none";
}

namespace {

ClipFlag ClipFlagFromName(std::string_view name) {
  if (name == "none") return ClipFlag::kNone;
  if (name == "over_length") return ClipFlag::kOverLength;
  if (name == "under_length") return ClipFlag::kUnderLength;
  throw Error(ErrorKind::kParse, "unknown clip flag " + std::string(name));
}

std::vector<int> RowStarts(const Utterance& utt) {
  std::vector<int> starts;
  int pos = 0;
  for (std::size_t i = 0; i < utt.rows.size(); ++i) {
    if (!utt.rows[i].gt_dur) {
      throw Error(ErrorKind::kValidation, "utterance " + utt.id + " row " + std::to_string(i) +
                                              " has no ground-truth duration");
    }
    starts.push_back(pos);
    pos += *utt.rows[i].gt_dur;
  }
  starts.push_back(pos);
  return starts;
}

void CheckClass(int class_index) {
  if (class_index < 0 || class_index >= static_cast<int>(kSegmentClasses.size())) {
    throw Error(ErrorKind::kValidation, "segment class " + std::to_string(class_index) +
                                            " out of range");
  }
}

}  // namespace

std::vector<int> DetectCutPoints(const Utterance& utt, int pause_frames) {
  auto starts = RowStarts(utt);
  std::vector<int> cuts = {0};
  for (std::size_t i = 0; i < utt.rows.size(); ++i) {
    const auto& r = utt.rows[i];
    if (!r.is_silence() || *r.gt_dur < pause_frames) continue;
    const int mid = starts[i] + *r.gt_dur / 2;
    if (mid > cuts.back() && mid < starts.back()) cuts.push_back(mid);
  }
  if (starts.back() > cuts.back()) cuts.push_back(starts.back());
  return cuts;
}

std::vector<Clip> Segment(const Utterance& utt, int class_index, int pause_frames) {
  CheckClass(class_index);
  const SegmentClass& cls = kSegmentClasses[class_index];
  auto cuts = DetectCutPoints(utt, pause_frames);
  std::vector<std::pair<int, int>> ranges;  // frame ranges
  if (cuts.size() < 2) return {};
  int cur_start = cuts[0], cur_end = cuts[1];
  for (std::size_t k = 2; k < cuts.size(); ++k) {
    const int span = cuts[k] - cuts[k - 1];
    const int cur = cur_end - cur_start;
    if (cur + span > cls.upper_frames && cur > cls.lower_frames) {
      ranges.emplace_back(cur_start, cur_end);
      cur_start = cuts[k - 1];
    }
    cur_end = cuts[k];
  }
  if (cur_end - cur_start <= cls.lower_frames && !ranges.empty()) {
    ranges.back().second = cur_end;
  } else {
    ranges.emplace_back(cur_start, cur_end);
  }

  auto starts = RowStarts(utt);
  std::vector<Clip> clips;
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    Clip c;
    c.utterance_id = utt.id;
    c.clip_id = utt.id + "_c" + std::to_string(class_index) + "_" + std::to_string(k);
    c.class_index = class_index;
    c.start_frame = ranges[k].first;
    c.end_frame = ranges[k].second;
    c.start_sec = utt.span_start + c.start_frame / 100.0;
    c.end_sec = utt.span_start + c.end_frame / 100.0;
    // Rows overlapping [start_frame, end_frame).
    c.row_begin = static_cast<int>(
        std::upper_bound(starts.begin(), starts.end() - 1, c.start_frame) - starts.begin() - 1);
    c.row_end = static_cast<int>(
        std::lower_bound(starts.begin(), starts.end() - 1, c.end_frame) - starts.begin());
    if (c.frames() > cls.upper_frames) {
      c.flag = ClipFlag::kOverLength;
      Warn("clip " + c.clip_id + " is " + std::to_string(c.frames() / 100.0) +
           " s, over the class bound of " + std::to_string(cls.upper_frames / 100) + " s");
    } else if (c.frames() <= cls.lower_frames) {
      c.flag = ClipFlag::kUnderLength;
    }
    clips.push_back(std::move(c));
  }
  return clips;
}

std::vector<Clip> VsAugment(std::span<const Utterance> corpus, int pause_frames) {
  std::vector<Clip> out;
  for (const auto& utt : corpus) {
    for (int c = 0; c < static_cast<int>(kSegmentClasses.size()); ++c) {
      auto clips = Segment(utt, c, pause_frames);
      out.insert(out.end(), clips.begin(), clips.end());
    }
  }
  return out;
}

Utterance ClipUtterance(const Utterance& utt, const Clip& clip) {
  auto starts = RowStarts(utt);
  Utterance out;
  out.id = clip.clip_id;
  out.singer_id = utt.singer_id;
  out.span_start = clip.start_sec;
  out.span_end = clip.end_sec;
  for (int i = clip.row_begin; i < clip.row_end; ++i) {
    const int b = std::max(starts[i], clip.start_frame);
    const int e = std::min(starts[i + 1], clip.end_frame);
    if (e <= b) continue;
    PhonemeRow row = utt.rows[i];
    if (e - b != *row.gt_dur) {
      if (!row.is_silence()) {
        throw Error(ErrorKind::kAlignment, "clip " + clip.clip_id + " splits non-silence row " +
                                               std::to_string(i));
      }
      row.gt_dur = e - b;
      row.nominal_dur = e - b;
      row.bt = e - b;
    }
    out.rows.push_back(row);
  }
  return out;
}

std::string ClipToJsonLine(const Clip& c) {
  nlohmann::ordered_json j = {{"clip_id", c.clip_id},
                              {"utterance_id", c.utterance_id},
                              {"start_sec", c.start_sec},
                              {"end_sec", c.end_sec},
                              {"class", kSegmentClasses[c.class_index].name},
                              {"start_frame", c.start_frame},
                              {"end_frame", c.end_frame},
                              {"row_begin", c.row_begin},
                              {"row_end", c.row_end},
                              {"flag", ClipFlagName(c.flag)}};
  return j.dump();
}

Clip ClipFromJsonLine(std::string_view line) {
  try {
    auto j = nlohmann::json::parse(line);
    Clip c;
    c.clip_id = j.at("clip_id");
    c.utterance_id = j.at("utterance_id");
    c.start_sec = j.at("start_sec");
    c.end_sec = j.at("end_sec");
    const std::string cls = j.at("class");
    c.class_index = -1;
    for (std::size_t k = 0; k < kSegmentClasses.size(); ++k) {
      if (kSegmentClasses[k].name == cls) c.class_index = static_cast<int>(k);
    }
    if (c.class_index < 0) throw Error(ErrorKind::kParse, "unknown clip class " + cls);
    c.start_frame = j.at("start_frame");
    c.end_frame = j.at("end_frame");
    c.row_begin = j.at("row_begin");
    c.row_end = j.at("row_end");
    c.flag = ClipFlagFromName(j.at("flag").get<std::string>());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("clip manifest: ") + e.what());
  }
}

std::string ClipManifest(std::span<const Clip> clips) {
  std::string out;
  for (const auto& c : clips) out += ClipToJsonLine(c) + "\n";
  return out;
}

std::vector<Clip> ParseClipManifest(std::string_view text) {
  std::vector<Clip> clips;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    clips.push_back(ClipFromJsonLine(line));
  }
  return clips;
}

Score TransposeScore(const Score& score, int semitones) {
  Score out = score;
  for (auto& ev : out.events) {
    for (auto& note : ev.notes) {
      if (note.pitch.rest) continue;
      const int midi = note.pitch.midi + semitones;
      if (midi < 0 || midi > 127) {
        throw Error(ErrorKind::kRange, "transposed pitch " + std::to_string(midi) +
                                           " outside MIDI range");
      }
      note.pitch.midi = midi;
    }
  }
  return out;
}

}  // namespace warbler
