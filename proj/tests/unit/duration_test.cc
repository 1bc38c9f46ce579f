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

#include <cmath>
#include <filesystem>
#include <numeric>

#include "oracles.h"
#include "warbler/duration.h"
#include "warbler/error.h"

using namespace warbler;

namespace {

DurationModelConfig TinyConfig() {
  DurationModelConfig c;
  c.ph_dim = c.pt_dim = c.pi_dim = c.sr_dim = c.bt_dim = 4;
  c.layers = 1;
  c.hidden = 6;
  return c;
}

Score OneSyllable(const std::string& pinyin, Beats beats) {
  Score s;
  Note n;
  n.pitch = NotePitch{60, false};
  n.beats = beats;
  s.events.push_back(SyllableEvent{pinyin, {n}});
  return s;
}

std::vector<Utterance> SmallCorpus(int count, int events, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::vector<Utterance> corpus;
  for (int i = 0; i < count; ++i) corpus.push_back(oracle::RandomUtterance(rng, events));
  return corpus;
}

}  // namespace

TEST_CASE("duration model emits one prediction per row") {
  DurationModel m(TinyConfig(), 1);
  nn::Rng rng(2);
  Utterance u = oracle::RandomUtterance(rng, 12);
  CHECK(m.PredictLogDurations(u.rows).size() == u.rows.size());
  nn::Tape tape;
  nn::Var y = m.Forward(tape, u.rows);
  CHECK(y.value().rows() == static_cast<int>(u.rows.size()));
  CHECK(y.value().cols() == 1);
}

TEST_CASE("a zeroed head predicts its bias everywhere") {
  DurationModel m(TinyConfig(), 1);
  m.params().Get("dur/head/w").value.Fill(0.0);
  m.output_bias().value.Fill(1.25);
  nn::Rng rng(3);
  for (double v : m.PredictLogDurations(oracle::RandomUtterance(rng, 8).rows)) {
    CHECK(v == 1.25);
  }
}

TEST_CASE("output bias starts at the mean log duration") {
  DurationModel m(TinyConfig(), 1);
  auto corpus = SmallCorpus(3, 6, 4);
  double sum = 0.0;
  int n = 0;
  for (const auto& u : corpus)
    for (const auto& r : u.rows) {
      sum += std::log(static_cast<double>(*r.gt_dur));
      ++n;
    }
  InitDurationOutputBias(m, corpus);
  CHECK(m.output_bias().value[0] == doctest::Approx(sum / n).epsilon(1e-12));
}

TEST_CASE("multiscale loss worked examples") {
  const std::vector<double> gt{10.0, 20.0};
  const std::vector<double> pred{12.0, 16.0};
  const SyllableMap one{{0, 2}};
  const SyllableMap two{{0, 1}, {1, 2}};
  auto eval = [](std::span<const double> p, std::span<const double> g, const SyllableMap& m,
                 bool syl) {
    nn::Tape t;
    nn::Tensor x(static_cast<int>(p.size()), 1);
    for (std::size_t i = 0; i < p.size(); ++i) x[i] = p[i];
    return MultiscaleLoss(t.Constant(x), g, m, syl).value().item();
  };
  CHECK(eval(gt, gt, one, true) == 0.0);
  // (30 - 28)^2 + ((-2)^2 + 4^2) / 2
  CHECK(eval(pred, gt, one, true) == doctest::Approx(14.0));
  // ((-2)^2 + 4^2) / 2 + ((-2)^2 + 4^2) / 2
  CHECK(eval(pred, gt, two, true) == doctest::Approx(20.0));
  CHECK(eval(pred, gt, one, false) == doctest::Approx(10.0));
  auto terms = MultiscaleLossTerms(pred, gt, one);
  CHECK(terms.term1 == doctest::Approx(4.0));
  CHECK(terms.term2 == doctest::Approx(10.0));
}

TEST_CASE("largest-remainder apportionment") {
  CHECK(ApportionLargestRemainder(std::vector<double>{1, 1, 1}, 10) == std::vector<int>{4, 3, 3});
  CHECK(ApportionLargestRemainder(std::vector<double>{0.5, 0.25, 0.25}, 3) ==
        std::vector<int>{1, 1, 1});
  CHECK(ApportionLargestRemainder(std::vector<double>{3, 1}, 8) == std::vector<int>{6, 2});
  nn::Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> w(1 + rng.UniformInt(6));
    for (double& x : w) x = rng.Uniform(0.01, 10.0);
    const int total = rng.UniformInt(301);
    auto out = ApportionLargestRemainder(w, total);
    CHECK(std::accumulate(out.begin(), out.end(), 0) == total);
  }
}

TEST_CASE("postprocess fits syllables and caps initials") {
  auto rows = BuildRows(OneSyllable("zhang", Beats(2)));
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].nominal_dur + rows[1].nominal_dur == 100);
  CHECK(PostprocessDurations(std::vector<double>{30.0, 90.0}, rows) == std::vector<int>{10, 90});
  CHECK(PostprocessDurations(std::vector<double>{5.0, 15.0}, rows) == std::vector<int>{10, 90});
  CHECK(PostprocessDurations(std::vector<double>{1.0, 99.0}, rows) == std::vector<int>{1, 99});
  CHECK_THROWS_AS(PostprocessDurations(std::vector<double>{1.0}, rows), Error);
  CHECK_THROWS_AS(PostprocessDurations(std::vector<double>{0.0, 0.0}, rows), Error);
}

TEST_CASE("postprocess invariants on random scores") {
  nn::Rng rng(6);
  for (int k = 0; k < 50; ++k) {
    Utterance u = oracle::RandomUtterance(rng, 10);
    std::vector<double> pred(u.rows.size());
    for (double& p : pred) p = rng.Uniform(0.5, 60.0);
    auto out = PostprocessDurations(pred, u.rows);
    auto bad = oracle::CheckPostprocessed(u.rows, out);
    CHECK_MESSAGE(!bad, bad.value_or(""));
  }
}

TEST_CASE("training descends and respects a zero learning rate") {
  auto corpus = SmallCorpus(4, 8, 7);
  DurationTrainOptions opt;
  opt.holdout_fraction = 0.0;

  DurationModel frozen(TinyConfig(), 1);
  const nn::Tensor before = frozen.params().Get("dur/head/w").value;
  opt.epochs = 2;
  opt.lr = 0.0;
  TrainDuration(frozen, corpus, opt);
  CHECK(frozen.params().Get("dur/head/w").value == before);

  DurationModel m(TinyConfig(), 1);
  InitDurationOutputBias(m, corpus);
  opt.lr = 1e-2;
  opt.epochs = 8;
  auto report = TrainDuration(m, corpus, opt);
  REQUIRE(report.epochs.size() == 8);
  CHECK(report.epochs.back().loss < report.epochs.front().loss);

  DurationModel again(TinyConfig(), 1);
  InitDurationOutputBias(again, corpus);
  auto report2 = TrainDuration(again, corpus, opt);
  CHECK(report2.epochs.back().loss == report.epochs.back().loss);

  opt.lr = -1.0;
  CHECK_THROWS_AS(TrainDuration(m, corpus, opt), Error);
}

TEST_CASE("duration checkpoints round-trip") {
  DurationModel m(TinyConfig(), 9);
  const auto path = (std::filesystem::temp_directory_path() / "warbler_dur_test.ckpt").string();
  m.Save(path);
  DurationModel loaded = DurationModel::Load(path);
  CHECK(loaded.config() == m.config());
  nn::Rng rng(10);
  Utterance u = oracle::RandomUtterance(rng, 6);
  auto a = m.PredictLogDurations(u.rows);
  auto b = loaded.PredictLogDurations(u.rows);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-5));
  const auto path2 = path + "2";
  loaded.Save(path2);
  CHECK(DurationModel::Load(path2).PredictLogDurations(u.rows) == b);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
  CHECK_THROWS_AS(DurationModel::Load(path), Error);
}

TEST_CASE("invalid configs are rejected") {
  DurationModelConfig c = TinyConfig();
  c.hidden = 0;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = TinyConfig();
  c.layers = 0;
  CHECK_THROWS_AS(DurationModel(c, 1), Error);
}
