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

#include <filesystem>

#include "warbler/corpus.h"
#include "warbler/synth.h"

using namespace warbler;

TEST_CASE("synthetic corpus is seeded and annotates its own scores") {
  SynthCorpusOptions o;
  o.songs = 4;
  o.singers = 2;
  o.seed = 5;
  o.render_audio = false;
  const auto a = GenerateSynthCorpus(o);
  const auto b = GenerateSynthCorpus(o);
  REQUIRE(a.size() == 4);
  for (std::size_t s = 0; s < a.size(); ++s) {
    CHECK(a[s].score == b[s].score);
    CHECK(a[s].intervals == b[s].intervals);
    CHECK(a[s].singer_index == static_cast<int>(s % 2));
    CHECK(a[s].audio.samples.empty());
    auto rows = AttachGroundTruth(BuildRows(a[s].score), a[s].intervals);
    for (const auto& r : rows) CHECK(*r.gt_dur >= 0);
    CHECK(ParseMusicXml(WriteMusicXml(a[s].score)) == a[s].score);
  }
  o.seed = 6;
  CHECK(GenerateSynthCorpus(o)[0].score != a[0].score);
}

TEST_CASE("rendered audio matches the annotated length") {
  SynthCorpusOptions o;
  o.songs = 1;
  o.singers = 1;
  o.seed = 2;
  const auto songs = GenerateSynthCorpus(o);
  const auto rows = AttachGroundTruth(BuildRows(songs[0].score), songs[0].intervals);
  int frames = 0;
  for (const auto& r : rows) frames += *r.gt_dur;
  CHECK(songs[0].audio.samples.size() == static_cast<std::size_t>(frames) * 240 + 240);
  CHECK(ExtractFeatures(songs[0].audio).size() == static_cast<std::size_t>(frames));
}

TEST_CASE("corpus files round trip through the manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "warbler_synth_test";
  std::filesystem::remove_all(dir);
  SynthCorpusOptions o;
  o.songs = 2;
  o.singers = 2;
  o.render_audio = false;
  const std::string manifest = WriteSynthCorpus(dir.string(), o);
  auto entries = ReadCorpusManifest(manifest);
  REQUIRE(entries.size() == 2);
  CHECK(SingerList(entries) == std::vector<std::string>{"singer0", "singer1"});
  const auto songs = GenerateSynthCorpus(o);
  Utterance u = LoadAnnotatedUtterance(entries[0]);
  CHECK(u.rows == AttachGroundTruth(BuildRows(songs[0].score), songs[0].intervals));
  std::filesystem::remove_all(dir);
}
