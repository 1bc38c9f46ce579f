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
#include <complex>
#include <numbers>

#include "oracles.h"
#include "warbler/dsp.h"
#include "warbler/error.h"

using namespace warbler;

TEST_CASE("frame count follows the framing formula") {
  for (std::size_t n : {0, 100, 479, 480, 481, 719, 720, 24000, 24001}) {
    const int expected = n < 480 ? 0 : static_cast<int>((n - 480) / 240 + 1);
    CHECK(FrameCount(n) == expected);
    Waveform w{std::vector<double>(n, 0.0)};
    if (expected == 0) {
      CHECK_THROWS_AS(ExtractFeatures(w), Error);
    } else {
      CHECK(static_cast<int>(ExtractFeatures(w).size()) == expected);
    }
  }
}

TEST_CASE("digital silence") {
  Waveform w{std::vector<double>(4800, 0.0)};
  auto bands = AnalyzeBandLogEnergies(w);
  for (const auto& f : bands)
    for (double e : f) CHECK(e == doctest::Approx(std::log(1e-10)));
  auto bfcc = AnalyzeBfcc(w);
  for (const auto& f : bfcc) CHECK(f == bfcc.front());
  for (const auto& p : EstimatePitch(w)) {
    CHECK_FALSE(p.voiced);
    CHECK(p.log_f0 == doctest::Approx(std::log(100.0)));
  }
  for (const auto& f : ExtractFeatures(w)) {
    CHECK(f.pitch_corr() == 0.0);
    CHECK(f.log_f0() == doctest::Approx(std::log(100.0)));
  }
}

TEST_CASE("a 1 kHz tone lands in the band of its DFT peak") {
  Waveform w;
  w.samples.resize(4800);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * i / kSampleRate);
  }
  // Independent naive DFT of one frame.
  int peak_bin = 0;
  double peak = 0.0;
  for (int k = 0; k <= 256; ++k) {
    std::complex<double> acc = 0.0;
    for (int n = 0; n < 512; ++n) {
      acc += w.samples[1000 + n] * std::polar(1.0, -2.0 * std::numbers::pi * k * n / 512.0);
    }
    if (std::abs(acc) > peak) {
      peak = std::abs(acc);
      peak_bin = k;
    }
  }
  const double peak_hz = peak_bin * static_cast<double>(kSampleRate) / 512.0;
  const auto centers = BandCentersHz();
  int nearest = 0;
  for (int b = 1; b < kBfccDims; ++b) {
    if (std::abs(HzToBark(centers[b]) - HzToBark(peak_hz)) <
        std::abs(HzToBark(centers[nearest]) - HzToBark(peak_hz))) {
      nearest = b;
    }
  }
  auto bands = AnalyzeBandLogEnergies(w);
  for (std::size_t f = 1; f + 1 < bands.size(); ++f) {
    const int arg = static_cast<int>(std::max_element(bands[f].begin(), bands[f].end()) - bands[f].begin());
    CHECK(arg == nearest);
  }
  auto bfcc = AnalyzeBfcc(w);
  for (std::size_t f = 2; f + 2 < bfcc.size(); ++f) {
    for (int d = 0; d < kBfccDims; ++d) CHECK(bfcc[f][d] == doctest::Approx(bfcc[2][d]).epsilon(1e-6));
  }
}

TEST_CASE("analysis of a concatenation matches the parts away from the junction") {
  Waveform a = oracle::Sawtooth(180.0, 0.3);
  Waveform b = oracle::WhiteNoise(4, 0.2);
  Waveform ab = a;
  ab.samples.insert(ab.samples.end(), b.samples.begin(), b.samples.end());
  auto fa = AnalyzeBfcc(a), fb = AnalyzeBfcc(b), fab = AnalyzeBfcc(ab);
  const int shift = static_cast<int>(a.samples.size()) / 240;
  for (std::size_t f = 0; f < fa.size(); ++f) {
    for (int d = 0; d < kBfccDims; ++d) CHECK(fab[f][d] == doctest::Approx(fa[f][d]).epsilon(1e-9));
  }
  for (std::size_t f = 0; f < fb.size(); ++f) {
    for (int d = 0; d < kBfccDims; ++d) {
      CHECK(fab[f + shift][d] == doctest::Approx(fb[f][d]).epsilon(1e-9));
    }
  }
}

TEST_CASE("sawtooth pitch and feature composition") {
  Waveform w = oracle::Sawtooth(220.0, 1.0);
  auto pitch = EstimatePitch(w);
  auto feats = ExtractFeatures(w);
  REQUIRE(pitch.size() == feats.size());
  for (std::size_t f = 0; f < pitch.size(); ++f) {
    CHECK(feats[f].log_f0() == pitch[f].log_f0);
    CHECK(feats[f].pitch_corr() == pitch[f].pitch_corr);
  }
  for (std::size_t f = 2; f + 2 < pitch.size(); ++f) {
    CHECK(std::exp(pitch[f].log_f0) == doctest::Approx(220.0).epsilon(3.0 / 220.0));
    CHECK(pitch[f].pitch_corr > 0.9);
    CHECK(pitch[f].voiced);
  }
}

TEST_CASE("white noise is mostly unvoiced") {
  auto pitch = EstimatePitch(oracle::WhiteNoise(1, 1.0));
  int voiced = 0;
  for (const auto& p : pitch) voiced += p.voiced;
  CHECK(voiced < 0.1 * pitch.size());
}

TEST_CASE("amplitude scaling only shifts the energy coefficient") {
  Waveform w = oracle::Sawtooth(150.0, 0.5);
  Waveform n = oracle::WhiteNoise(2, 0.5, 0.05);
  for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] += n.samples[i];
  Waveform s = w;
  const double scale = 0.37;
  for (double& x : s.samples) x *= scale;
  auto fw = ExtractFeatures(w), fs = ExtractFeatures(s);
  const double shift = std::sqrt(static_cast<double>(kBfccDims)) * 2.0 * std::log(scale);
  for (std::size_t f = 0; f < fw.size(); ++f) {
    CHECK(fs[f].bfcc(0) - fw[f].bfcc(0) == doctest::Approx(shift).epsilon(1e-6));
    for (int d = 1; d < kBfccDims; ++d) CHECK(std::abs(fs[f].bfcc(d) - fw[f].bfcc(d)) < 1e-6);
    CHECK(std::abs(fs[f].log_f0() - fw[f].log_f0()) < 1e-6);
    CHECK(std::abs(fs[f].pitch_corr() - fw[f].pitch_corr()) < 1e-6);
  }
}

TEST_CASE("DCT round trip") {
  nn::Rng rng(1);
  BfccFrame x;
  for (double& v : x) v = rng.Uniform(-3.0, 3.0);
  auto back = InverseDctII(DctII(x));
  for (int d = 0; d < kBfccDims; ++d) CHECK(back[d] == doctest::Approx(x[d]).epsilon(1e-12));
}

TEST_CASE("a flat spectrum is unpredictable") {
  BfccFrame bands;
  bands.fill(std::log(0.01));
  auto lpc = BfccToLpc(DctII(bands));
  for (double a : lpc) CHECK(std::abs(a) < 1e-3);
}

TEST_CASE("LPC synthesis filters are stable") {
  nn::Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    BfccFrame b{};
    b[0] = rng.Uniform(-60.0, 20.0);
    for (int d = 1; d < kBfccDims; ++d) b[d] = rng.Uniform(-8.0, 8.0) / d;
    auto r = BfccToLpcDetailed(b);
    REQUIRE(r.reflection.size() == kLpcOrder);
    for (double k : r.reflection) CHECK(std::abs(k) < 1.0);
  }
}

TEST_CASE("Levinson-Durbin solves a known AR(1) autocorrelation") {
  // r[k] = 0.5^k gives a[0] = 0.5 and zeros elsewhere.
  std::vector<double> r(5);
  for (int k = 0; k < 5; ++k) r[k] = std::pow(0.5, k);
  auto res = LevinsonDurbin(r, 4);
  CHECK(res.lpc[0] == doctest::Approx(0.5));
  for (int k = 1; k < 4; ++k) CHECK(std::abs(res.lpc[k]) < 1e-12);
  CHECK(res.error == doctest::Approx(0.75));
}

TEST_CASE("min-max normalization") {
  std::vector<AcousticFrame> frames(3);
  for (int d = 0; d < kFeatureDims; ++d) {
    frames[0].v[d] = 0.0;
    frames[1].v[d] = 1.0;
    frames[2].v[d] = 0.25;
  }
  auto stats = MinMaxFit(frames);
  CHECK(Normalize(frames, stats) == frames);

  std::vector<AcousticFrame> c(4);
  nn::Rng rng(2);
  for (auto& f : c) {
    for (double& v : f.v) v = rng.Uniform(-100.0, 100.0);
    f.v[5] = 3.0;
  }
  auto s2 = MinMaxFit(c);
  auto n = Normalize(c, s2);
  auto back = Denormalize(n, s2);
  for (std::size_t t = 0; t < c.size(); ++t) {
    CHECK(n[t].v[5] == 0.0);
    CHECK(back[t].v[5] == 3.0);
    for (int d = 0; d < kFeatureDims; ++d) {
      CHECK(n[t].v[d] >= 0.0);
      CHECK(n[t].v[d] <= 1.0);
      CHECK(back[t].v[d] == doctest::Approx(c[t].v[d]).epsilon(1e-6));
    }
  }
  CHECK(NormStatsFromJson(NormStatsToJson(s2)) == s2);
  CHECK_THROWS_AS(MinMaxFit(std::vector<AcousticFrame>{}), Error);
}

TEST_CASE("WAV and feature files round-trip") {
  Waveform w = oracle::Sawtooth(300.0, 0.1);
  Waveform back = DecodeWav(EncodeWav(w));
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0 / 32767.0);
  Waveform other = w;
  other.sample_rate = 16000;
  CHECK_THROWS_AS(EncodeWav(other), Error);
  CHECK_THROWS_AS(DecodeWav("RIFF"), Error);
}
