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

// Pitch-aware acoustic features at 24 kHz: 24 Bark-frequency cepstral
// coefficients, log-F0 and pitch correlation per 10 ms frame, plus the
// cepstrum-to-LPC conversion used by the vocoder front end.

#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace warbler {

inline constexpr int kSampleRate = 24000;
inline constexpr int kBfccDims = 24;
inline constexpr int kFeatureDims = 26;
inline constexpr int kLogF0Dim = 24;
inline constexpr int kPitchCorrDim = 25;
inline constexpr int kLpcOrder = 16;

/// Hidden width of the vocoder's first sample-rate GRU. The sample-level
/// network is not part of this library; the value documents the feature
/// consumer this front end targets (widened from 384).
inline constexpr int kVocoderGruAWidth = 512;

/// Every DSP constant lives here. Structural sizes (24 bands, 26 dims,
/// 24 kHz) are fixed and not part of the struct.
struct DspConfig {
  int hop = 240;
  int window = 480;
  int fft_size = 512;
  double band_max_hz = 12000.0;
  double log_floor = 1e-10;
  int pitch_window = 480;
  int min_lag = 60;
  int max_lag = 600;
  double voicing_threshold = 0.3;
  /// A candidate lag shorter than the best one is preferred when its
  /// correlation is at least this fraction of the maximum (octave guard).
  double octave_guard = 0.8;
  double unvoiced_log_f0_hz = 100.0;
  double lag_window_hz = 60.0;
  double noise_floor = 1e-5;

  void Validate() const;
};

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
};

struct AcousticFrame {
  std::array<double, kFeatureDims> v{};

  double& bfcc(int i) { return v[i]; }
  double bfcc(int i) const { return v[i]; }
  double& log_f0() { return v[kLogF0Dim]; }
  double log_f0() const { return v[kLogF0Dim]; }
  double& pitch_corr() { return v[kPitchCorrDim]; }
  double pitch_corr() const { return v[kPitchCorrDim]; }

  bool operator==(const AcousticFrame&) const = default;
};

using BfccFrame = std::array<double, kBfccDims>;

struct PitchFrame {
  double log_f0 = 0.0;
  double pitch_corr = 0.0;
  bool voiced = false;
};

struct NormStats {
  std::array<double, kFeatureDims> min{};
  std::array<double, kFeatureDims> max{};

  bool operator==(const NormStats&) const = default;
};

/// floor((len - window) / hop) + 1; zero when the input is shorter than
/// one window.
int FrameCount(std::size_t num_samples, const DspConfig& config = {});

/// Frequency (Hz) of each of the 24 Bark-spaced band centers.
std::array<double, kBfccDims> BandCentersHz(const DspConfig& config = {});
double HzToBark(double hz);

/// Per-band log of the triangular-weighted mean power, before the DCT.
std::vector<BfccFrame> AnalyzeBandLogEnergies(const Waveform& w,
                                              const DspConfig& config = {});
std::vector<BfccFrame> AnalyzeBfcc(const Waveform& w,
                                   const DspConfig& config = {});
std::vector<PitchFrame> EstimatePitch(const Waveform& w,
                                      const DspConfig& config = {});
std::vector<AcousticFrame> ExtractFeatures(const Waveform& w,
                                           const DspConfig& config = {});

/// Orthonormal DCT-II over the 24 bands and its inverse.
BfccFrame DctII(const BfccFrame& x);
BfccFrame InverseDctII(const BfccFrame& c);

struct LevinsonResult {
  /// Prediction coefficients: x[n] ~ sum_k a[k] * x[n - 1 - k].
  std::vector<double> lpc;
  std::vector<double> reflection;
  double error = 0.0;
};

LevinsonResult LevinsonDurbin(std::span<const double> autocorr, int order);

/// Autocorrelation (lags 0..kLpcOrder) implied by a Bark cepstrum, with lag
/// window and noise floor applied.
std::vector<double> BfccToAutocorrelation(const BfccFrame& bfcc,
                                          const DspConfig& config = {});
LevinsonResult BfccToLpcDetailed(const BfccFrame& bfcc,
                                 const DspConfig& config = {});
std::array<double, kLpcOrder> BfccToLpc(const BfccFrame& bfcc,
                                        const DspConfig& config = {});

NormStats MinMaxFit(std::span<const AcousticFrame> frames);
std::vector<AcousticFrame> Normalize(std::span<const AcousticFrame> frames,
                                     const NormStats& stats);
std::vector<AcousticFrame> Denormalize(std::span<const AcousticFrame> frames,
                                       const NormStats& stats);

// WAV (PCM16 mono, 24 kHz only) and WSFEAT1 feature files.
Waveform ReadWav(const std::string& path);
Waveform DecodeWav(std::string_view bytes);
void WriteWav(const std::string& path, const Waveform& w);
std::string EncodeWav(const Waveform& w);

void WriteFeatureFile(const std::string& path,
                      std::span<const AcousticFrame> frames);
std::vector<AcousticFrame> ReadFeatureFile(const std::string& path);

std::string NormStatsToJson(const NormStats& stats);
NormStats NormStatsFromJson(std::string_view json);

}  // namespace warbler
