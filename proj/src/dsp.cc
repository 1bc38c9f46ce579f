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

#include "warbler/dsp.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "warbler/error.h"

namespace warbler {

namespace {

// FFTW's planner is not re-entrant; execution on distinct plans is.
std::mutex g_fftw_planner_mutex;

/// Real-input FFT of a fixed size with its own scratch buffers.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(g_fftw_planner_mutex);
    forward_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(n, out_, in_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(g_fftw_planner_mutex);
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(inverse_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  double* time() { return in_; }
  std::complex<double>* freq() {
    return reinterpret_cast<std::complex<double>*>(out_);
  }
  void Forward() { fftw_execute(forward_); }
  /// Unnormalized: result is n times the true inverse.
  void Inverse() { fftw_execute(inverse_); }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

double BarkToHz(double bark) {
  double lo = 0.0, hi = 48000.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (HzToBark(mid) < bark ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Band centers as fractional FFT-bin positions.
std::array<double, kBfccDims> BandCenterBins(const DspConfig& config) {
  auto hz = BandCentersHz(config);
  std::array<double, kBfccDims> bins{};
  double bin_hz = static_cast<double>(kSampleRate) / config.fft_size;
  for (int j = 0; j < kBfccDims; ++j) bins[j] = hz[j] / bin_hz;
  return bins;
}

// Triangular weights: weights[k] = {band, weight} pairs for bin k.
struct BandWeights {
  std::vector<int> lower_band;
  std::vector<double> upper_frac;
};

BandWeights MakeBandWeights(const DspConfig& config) {
  auto centers = BandCenterBins(config);
  int bins = config.fft_size / 2 + 1;
  BandWeights bw;
  bw.lower_band.assign(bins, -1);
  bw.upper_frac.assign(bins, 0.0);
  for (int k = 0; k < bins; ++k) {
    double pos = k;
    if (pos > centers.back() + 1e-9) continue;
    int j = 0;
    while (j + 1 < kBfccDims && centers[j + 1] <= pos) ++j;
    if (j + 1 >= kBfccDims) {
      bw.lower_band[k] = kBfccDims - 1;
      bw.upper_frac[k] = 0.0;
      continue;
    }
    bw.lower_band[k] = j;
    bw.upper_frac[k] = (pos - centers[j]) / (centers[j + 1] - centers[j]);
  }
  return bw;
}

std::vector<double> Hann(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

void CheckWaveform(const Waveform& w, const DspConfig& config) {
  if (w.sample_rate != kSampleRate) {
    throw Error(ErrorKind::kValidation,
                "sample rate " + std::to_string(w.sample_rate) +
                    " Hz is not supported; expected 24000");
  }
  if (w.samples.size() < static_cast<std::size_t>(config.window)) {
    throw Error(ErrorKind::kValidation,
                "waveform shorter than one analysis window");
  }
}

}  // namespace

void DspConfig::Validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kConfig, m); };
  if (hop <= 0 || window <= 0) fail("dsp hop/window must be positive");
  if (fft_size < window) fail("dsp fft_size must be >= window");
  if ((fft_size & (fft_size - 1)) != 0) fail("dsp fft_size must be a power of two");
  if (!(band_max_hz > 0.0) || band_max_hz > kSampleRate / 2.0) {
    fail("dsp band_max_hz must be in (0, 12000]");
  }
  if (min_lag < 2 || max_lag <= min_lag) fail("dsp lag range invalid");
  if (pitch_window <= 0) fail("dsp pitch_window must be positive");
  if (!(log_floor > 0.0)) fail("dsp log_floor must be positive");
  if (noise_floor < 0.0 || lag_window_hz < 0.0) fail("dsp lpc constants must be >= 0");
}

int FrameCount(std::size_t num_samples, const DspConfig& config) {
  if (num_samples < static_cast<std::size_t>(config.window)) return 0;
  return static_cast<int>((num_samples - config.window) / config.hop) + 1;
}

double HzToBark(double hz) {
  return 13.0 * std::atan(0.00076 * hz) +
         3.5 * std::atan((hz / 7500.0) * (hz / 7500.0));
}

std::array<double, kBfccDims> BandCentersHz(const DspConfig& config) {
  std::array<double, kBfccDims> hz{};
  double top = HzToBark(config.band_max_hz);
  for (int j = 0; j < kBfccDims; ++j) {
    hz[j] = j == 0 ? 0.0
                   : (j == kBfccDims - 1 ? config.band_max_hz
                                          : BarkToHz(top * j / (kBfccDims - 1)));
  }
  return hz;
}

BfccFrame DctII(const BfccFrame& x) {
  BfccFrame c{};
  const int n = kBfccDims;
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      s += x[i] * std::cos(std::numbers::pi * k * (i + 0.5) / n);
    }
    c[k] = s * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
  }
  return c;
}

BfccFrame InverseDctII(const BfccFrame& c) {
  BfccFrame x{};
  const int n = kBfccDims;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
      s += c[k] * std::sqrt((k == 0 ? 1.0 : 2.0) / n) *
           std::cos(std::numbers::pi * k * (i + 0.5) / n);
    }
    x[i] = s;
  }
  return x;
}

std::vector<BfccFrame> AnalyzeBandLogEnergies(const Waveform& w,
                                              const DspConfig& config) {
  config.Validate();
  CheckWaveform(w, config);
  const int frames = FrameCount(w.samples.size(), config);
  const auto window = Hann(config.window);
  const auto weights = MakeBandWeights(config);
  const int bins = config.fft_size / 2 + 1;

  std::array<double, kBfccDims> band_weight_sum{};
  for (int k = 0; k < bins; ++k) {
    int j = weights.lower_band[k];
    if (j < 0) continue;
    band_weight_sum[j] += 1.0 - weights.upper_frac[k];
    if (j + 1 < kBfccDims) band_weight_sum[j + 1] += weights.upper_frac[k];
  }

  RealFft fft(config.fft_size);
  std::vector<BfccFrame> out(frames);
  for (int f = 0; f < frames; ++f) {
    const std::size_t start = static_cast<std::size_t>(f) * config.hop;
    double* t = fft.time();
    for (int i = 0; i < config.fft_size; ++i) {
      t[i] = i < config.window ? w.samples[start + i] * window[i] : 0.0;
    }
    fft.Forward();
    const auto* spec = fft.freq();
    std::array<double, kBfccDims> energy{};
    for (int k = 0; k < bins; ++k) {
      int j = weights.lower_band[k];
      if (j < 0) continue;
      double p = std::norm(spec[k]);
      energy[j] += (1.0 - weights.upper_frac[k]) * p;
      if (j + 1 < kBfccDims) energy[j + 1] += weights.upper_frac[k] * p;
    }
    for (int j = 0; j < kBfccDims; ++j) {
      out[f][j] = std::log(std::max(energy[j] / band_weight_sum[j], config.log_floor));
    }
  }
  return out;
}

std::vector<BfccFrame> AnalyzeBfcc(const Waveform& w, const DspConfig& config) {
  auto bands = AnalyzeBandLogEnergies(w, config);
  for (auto& frame : bands) frame = DctII(frame);
  return bands;
}

std::vector<PitchFrame> EstimatePitch(const Waveform& w, const DspConfig& config) {
  config.Validate();
  CheckWaveform(w, config);
  const int frames = FrameCount(w.samples.size(), config);
  const int win = config.pitch_window;
  const int ext = win + config.max_lag + 1;
  int fft_n = 1;
  while (fft_n < win + ext) fft_n <<= 1;

  const long long n = static_cast<long long>(w.samples.size());
  auto sample = [&](long long i) { return i >= 0 && i < n ? w.samples[i] : 0.0; };
  // Prefix sums of squared samples over [-pad, n + pad).
  const long long pad = win + ext;
  std::vector<double> energy_prefix(n + 2 * pad + 1, 0.0);
  for (long long i = -pad; i < n + pad; ++i) {
    double s = sample(i);
    energy_prefix[i + pad + 1] = energy_prefix[i + pad] + s * s;
  }
  auto energy = [&](long long from, long long len) {
    return energy_prefix[from + len + pad] - energy_prefix[from + pad];
  };

  // Normalized correlation of the frame window with the windows `lag`
  // samples later and earlier, averaged so that onsets and offsets do not
  // favour long lags.
  RealFft seg_fft(fft_n), fwd_fft(fft_n), bwd_fft(fft_n);
  std::vector<std::complex<double>> seg_spec(fft_n / 2 + 1);
  std::vector<double> corr(config.max_lag + 2, 0.0);
  std::vector<PitchFrame> out(frames);
  const int back = config.max_lag + 1;

  for (int f = 0; f < frames; ++f) {
    const long long center = static_cast<long long>(f) * config.hop + config.window / 2;
    const long long start = center - win / 2;
    const double e0 = energy(start, win);

    double* ts = seg_fft.time();
    double* tf = fwd_fft.time();
    double* tb = bwd_fft.time();
    for (int i = 0; i < fft_n; ++i) {
      ts[i] = i < win ? sample(start + i) : 0.0;
      tf[i] = i < ext ? sample(start + i) : 0.0;
      tb[i] = i < ext ? sample(start - back + i) : 0.0;
    }
    seg_fft.Forward();
    fwd_fft.Forward();
    bwd_fft.Forward();
    std::copy(seg_fft.freq(), seg_fft.freq() + fft_n / 2 + 1, seg_spec.begin());
    for (RealFft* t : {&fwd_fft, &bwd_fft}) {
      auto* spec = t->freq();
      for (int k = 0; k <= fft_n / 2; ++k) spec[k] *= std::conj(seg_spec[k]);
      t->Inverse();
    }
    const double* xf = fwd_fft.time();
    const double* xb = bwd_fft.time();

    int best = -1;
    double best_corr = 0.0;
    for (int lag = config.min_lag - 1; lag <= config.max_lag + 1; ++lag) {
      const double ef = energy(start + lag, win);
      const double eb = energy(start - lag, win);
      const double df = std::sqrt(e0 * ef);
      const double db = std::sqrt(e0 * eb);
      const double cf = df > 1e-12 ? (xf[lag] / fft_n) / df : 0.0;
      const double cb = db > 1e-12 ? (xb[back - lag] / fft_n) / db : 0.0;
      corr[lag] = 0.5 * (cf + cb);
      if (lag >= config.min_lag && lag <= config.max_lag &&
          corr[lag] > best_corr) {
        best_corr = corr[lag];
        best = lag;
      }
    }
    PitchFrame pf;
    if (best > 0) {
      // Prefer the shortest local peak close to the maximum.
      for (int lag = config.min_lag; lag < best; ++lag) {
        if (corr[lag] >= config.octave_guard * best_corr &&
            corr[lag] >= corr[lag - 1] && corr[lag] >= corr[lag + 1]) {
          best = lag;
          break;
        }
      }
      double c = corr[best];
      double refined = best;
      double l = corr[best - 1], r = corr[best + 1];
      double curvature = l - 2.0 * c + r;
      if (curvature < 0.0) {
        refined += std::clamp(0.5 * (l - r) / curvature, -0.5, 0.5);
      }
      pf.pitch_corr = std::clamp(c, 0.0, 1.0);
      pf.log_f0 = std::log(kSampleRate / refined);
    }
    pf.voiced = pf.pitch_corr >= config.voicing_threshold;
    out[f] = pf;
  }

  // Unvoiced frames: linear interpolation of log-F0 between voiced
  // neighbours, nearest value at the edges.
  std::vector<int> voiced;
  for (int f = 0; f < frames; ++f) {
    if (out[f].voiced) voiced.push_back(f);
  }
  if (voiced.empty()) {
    for (auto& pf : out) pf.log_f0 = std::log(config.unvoiced_log_f0_hz);
    return out;
  }
  std::size_t next = 0;
  for (int f = 0; f < frames; ++f) {
    if (out[f].voiced) {
      ++next;
      continue;
    }
    if (next == 0) {
      out[f].log_f0 = out[voiced.front()].log_f0;
    } else if (next == voiced.size()) {
      out[f].log_f0 = out[voiced.back()].log_f0;
    } else {
      int a = voiced[next - 1], b = voiced[next];
      double t = static_cast<double>(f - a) / (b - a);
      out[f].log_f0 = (1.0 - t) * out[a].log_f0 + t * out[b].log_f0;
    }
  }
  return out;
}

std::vector<AcousticFrame> ExtractFeatures(const Waveform& w,
                                           const DspConfig& config) {
  auto bfcc = AnalyzeBfcc(w, config);
  auto pitch = EstimatePitch(w, config);
  if (bfcc.size() != pitch.size()) {
    throw Error(ErrorKind::kShape, "bfcc/pitch frame count mismatch");
  }
  std::vector<AcousticFrame> out(bfcc.size());
  for (std::size_t f = 0; f < bfcc.size(); ++f) {
    std::copy(bfcc[f].begin(), bfcc[f].end(), out[f].v.begin());
    out[f].log_f0() = pitch[f].log_f0;
    out[f].pitch_corr() = pitch[f].pitch_corr;
  }
  return out;
}

LevinsonResult LevinsonDurbin(std::span<const double> autocorr, int order) {
  if (order < 1 || static_cast<int>(autocorr.size()) < order + 1) {
    throw Error(ErrorKind::kShape, "levinson: need order + 1 autocorrelation lags");
  }
  if (!(autocorr[0] > 0.0)) {
    throw Error(ErrorKind::kValidation, "levinson: r[0] must be positive");
  }
  LevinsonResult res;
  res.lpc.assign(order, 0.0);
  res.reflection.assign(order, 0.0);
  std::vector<double> prev(order, 0.0);
  double err = autocorr[0];
  for (int i = 0; i < order; ++i) {
    double acc = autocorr[i + 1];
    for (int j = 0; j < i; ++j) acc -= res.lpc[j] * autocorr[i - j];
    double k = acc / err;
    res.reflection[i] = k;
    prev = res.lpc;
    res.lpc[i] = k;
    for (int j = 0; j < i; ++j) res.lpc[j] = prev[j] - k * prev[i - 1 - j];
    err *= (1.0 - k * k);
  }
  res.error = err;
  return res;
}

std::vector<double> BfccToAutocorrelation(const BfccFrame& bfcc,
                                          const DspConfig& config) {
  for (double c : bfcc) {
    if (!std::isfinite(c)) {
      throw Error(ErrorKind::kValidation, "bfcc_to_lpc: non-finite coefficient");
    }
  }
  config.Validate();
  auto log_bands = InverseDctII(bfcc);
  auto centers = BandCenterBins(config);
  const int bins = config.fft_size / 2 + 1;

  RealFft fft(config.fft_size);
  auto* spec = fft.freq();
  int j = 0;
  for (int k = 0; k < bins; ++k) {
    double pos = k;
    double value;
    if (pos >= centers.back()) {
      value = std::exp(log_bands.back());
    } else {
      while (j + 1 < kBfccDims && centers[j + 1] <= pos) ++j;
      double frac = (pos - centers[j]) / (centers[j + 1] - centers[j]);
      value = (1.0 - frac) * std::exp(log_bands[j]) +
              frac * std::exp(log_bands[j + 1]);
    }
    spec[k] = value;
  }
  fft.Inverse();
  std::vector<double> r(kLpcOrder + 1);
  for (int k = 0; k <= kLpcOrder; ++k) {
    double x = 2.0 * std::numbers::pi * config.lag_window_hz * k / kSampleRate;
    r[k] = fft.time()[k] / config.fft_size * std::exp(-0.5 * x * x);
  }
  r[0] += r[0] * config.noise_floor + 1e-30;
  return r;
}

LevinsonResult BfccToLpcDetailed(const BfccFrame& bfcc, const DspConfig& config) {
  return LevinsonDurbin(BfccToAutocorrelation(bfcc, config), kLpcOrder);
}

std::array<double, kLpcOrder> BfccToLpc(const BfccFrame& bfcc,
                                        const DspConfig& config) {
  auto res = BfccToLpcDetailed(bfcc, config);
  std::array<double, kLpcOrder> out{};
  std::copy(res.lpc.begin(), res.lpc.end(), out.begin());
  return out;
}

NormStats MinMaxFit(std::span<const AcousticFrame> frames) {
  if (frames.empty()) {
    throw Error(ErrorKind::kValidation, "min-max fit needs at least one frame");
  }
  NormStats stats;
  stats.min = frames[0].v;
  stats.max = frames[0].v;
  for (const auto& f : frames) {
    for (int d = 0; d < kFeatureDims; ++d) {
      stats.min[d] = std::min(stats.min[d], f.v[d]);
      stats.max[d] = std::max(stats.max[d], f.v[d]);
    }
  }
  return stats;
}

std::vector<AcousticFrame> Normalize(std::span<const AcousticFrame> frames,
                                     const NormStats& stats) {
  std::vector<AcousticFrame> out(frames.begin(), frames.end());
  for (auto& f : out) {
    for (int d = 0; d < kFeatureDims; ++d) {
      double range = stats.max[d] - stats.min[d];
      f.v[d] = range > 0.0 ? (f.v[d] - stats.min[d]) / range : 0.0;
    }
  }
  return out;
}

std::vector<AcousticFrame> Denormalize(std::span<const AcousticFrame> frames,
                                       const NormStats& stats) {
  std::vector<AcousticFrame> out(frames.begin(), frames.end());
  for (auto& f : out) {
    for (int d = 0; d < kFeatureDims; ++d) {
      double range = stats.max[d] - stats.min[d];
      f.v[d] = range > 0.0 ? f.v[d] * range + stats.min[d] : stats.min[d];
    }
  }
  return out;
}

}  // namespace warbler
