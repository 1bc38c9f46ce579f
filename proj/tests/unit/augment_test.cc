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


#include <doctest.h>

#include "oracles.h"
#include "warbler/augment.h"
#include "warbler/phonemes.h"

using namespace warbler;

namespace {

PhonemeRow Row(std::string_view ph, PhonemeType pt, int syllable, int gt) {
  PhonemeRow r;
  r.ph = PhonemeId(ph);
  r.pt = pt;
  r.pi = pt == PhonemeType::kSilence ? NotePitch::Rest() : NotePitch{60, false};
  r.nominal_dur = gt;
  r.gt_dur = gt;
  r.syllable_index = syllable;
  return r;
}

Utterance ThreeSyllables(int middle_silence) {
  Utterance u;
  u.id = "u";
  u.rows = {Row("a", PhonemeType::kSingleFinal, 0, 100),
            Row(kSilencePhoneme, PhonemeType::kSilence, 1, middle_silence),
            Row("a", PhonemeType::kSingleFinal, 2, 100)};
  return u;
}

}  // namespace

TEST_CASE("cut points sit at pause midpoints") {
  CHECK(DetectCutPoints(ThreeSyllables(50)) == std::vector<int>{0, 125, 250});
  CHECK(DetectCutPoints(ThreeSyllables(5)) == std::vector<int>{0, 205});
  CHECK(DetectCutPoints(ThreeSyllables(10)) == std::vector<int>{0, 105, 210});
}

TEST_CASE("segmentation of a short song") {
  const Utterance u = ThreeSyllables(50);
  auto short_clips = Segment(u, 0);
  REQUIRE(short_clips.size() == 1);
  CHECK(short_clips[0].start_frame == 0);
  CHECK(short_clips[0].end_frame == 250);
  CHECK(short_clips[0].flag == ClipFlag::kNone);
  auto long_clips = Segment(u, 1);
  REQUIRE(long_clips.size() == 1);
  CHECK(long_clips[0].flag == ClipFlag::kUnderLength);
  for (int c = 0; c < 3; ++c) {
    auto bad = oracle::CheckSegmentation(u, c, Segment(u, c));
    CHECK_MESSAGE(!bad, bad.value_or(""));
  }
}

TEST_CASE("segmentation invariants on random utterances") {
  nn::Rng rng(12);
  for (int k = 0; k < 40; ++k) {
    Utterance u = oracle::RandomUtterance(rng, 30 + rng.UniformInt(60));
    u.id = "r" + std::to_string(k);
    for (int c = 0; c < 3; ++c) {
      auto bad = oracle::CheckSegmentation(u, c, Segment(u, c));
      CHECK_MESSAGE(!bad, bad.value_or(""));
    }
  }
}

TEST_CASE("augmentation covers every class") {
  nn::Rng rng(13);
  std::vector<Utterance> corpus;
  for (int k = 0; k < 3; ++k) {
    corpus.push_back(oracle::RandomUtterance(rng, 40));
    corpus.back().id = "s" + std::to_string(k);
  }
  auto clips = VsAugment(corpus);
  std::size_t expected = 0;
  for (const auto& u : corpus)
    for (int c = 0; c < 3; ++c) expected += Segment(u, c).size();
  CHECK(clips.size() == expected);
  for (const auto& clip : clips) {
    CHECK(clip.clip_id.rfind(clip.utterance_id + "_c" + std::to_string(clip.class_index) + "_", 0) ==
          0);
  }
  CHECK(ParseClipManifest(ClipManifest(clips)) == clips);
  CHECK(ClipFromJsonLine(ClipToJsonLine(clips.front())) == clips.front());
}

TEST_CASE("transposition shifts pitched notes only") {
  nn::Rng rng(14);
  Score s = oracle::RandomScore(rng, 20);
  Score up = TransposeScore(s, 1);
  REQUIRE(up.events.size() == s.events.size());
  for (std::size_t e = 0; e < s.events.size(); ++e) {
    CHECK(up.events[e].pinyin == s.events[e].pinyin);
    for (std::size_t n = 0; n < s.events[e].notes.size(); ++n) {
      const Note& a = s.events[e].notes[n];
      const Note& b = up.events[e].notes[n];
      CHECK(b.beats == a.beats);
      CHECK(b.pitch.rest == a.pitch.rest);
      CHECK(b.pitch.midi == (a.pitch.rest ? a.pitch.midi : a.pitch.midi + 1));
    }
  }
  CHECK(TransposeScore(up, -1) == s);
}
