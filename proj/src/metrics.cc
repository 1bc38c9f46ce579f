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

#include "warbler/metrics.h"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include <json.hpp>

#include "warbler/error.h"

namespace warbler {

namespace {

template <typename A, typename B>
void CheckLengths(const char* what, const A& a, const B& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kShape, std::string(what) + ": length mismatch " +
                                       std::to_string(a.size()) + " vs " +
                                       std::to_string(b.size()));
  }
}

void BothVoiced(std::span<const F0Point> pred, std::span<const F0Point> ref,
                std::vector<double>& p, std::vector<double>& r) {
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].voiced && ref[i].voiced) {
      p.push_back(pred[i].f0_hz);
      r.push_back(ref[i].f0_hz);
    }
  }
}

}  // namespace

std::optional<double> Pearson(std::span<const double> a, std::span<const double> b) {
  CheckLengths("pearson", a, b);
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

std::optional<double> F0Rmse(std::span<const F0Point> pred, std::span<const F0Point> ref) {
  CheckLengths("f0_rmse", pred, ref);
  std::vector<double> p, r;
  BothVoiced(pred, ref, p, r);
  if (p.empty()) return std::nullopt;
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sq += (p[i] - r[i]) * (p[i] - r[i]);
  return std::sqrt(sq / p.size());
}

std::optional<double> F0Corr(std::span<const F0Point> pred, std::span<const F0Point> ref) {
  CheckLengths("f0_corr", pred, ref);
  std::vector<double> p, r;
  BothVoiced(pred, ref, p, r);
  return Pearson(p, r);
}

double VuvError(std::span<const F0Point> pred, std::span<const F0Point> ref) {
  CheckLengths("vuv_error", pred, ref);
  if (pred.empty()) throw Error(ErrorKind::kValidation, "vuv_error: no frames");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i].voiced != ref[i].voiced;
  return static_cast<double>(wrong) / pred.size();
}

double Bfccd(std::span<const BfccFrame> pred, std::span<const BfccFrame> ref) {
  CheckLengths("bfccd", pred, ref);
  if (pred.empty()) throw Error(ErrorKind::kValidation, "bfccd: no frames");
  const double k = 10.0 * std::sqrt(2.0) / std::numbers::ln10;
  double total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    double sq = 0.0;
    for (int i = 1; i < kBfccDims; ++i) {
      const double d = pred[t][i] - ref[t][i];
      sq += d * d;
    }
    total += k * std::sqrt(sq);
  }
  return total / pred.size();
}

double DurAcc(std::span<const int> pred, std::span<const int> ref, int tolerance) {
  CheckLengths("dur_acc", pred, ref);
  if (pred.empty()) throw Error(ErrorKind::kValidation, "dur_acc: no phonemes");
  if (tolerance < 0) throw Error(ErrorKind::kValidation, "dur_acc: negative tolerance");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += std::abs(pred[i] - ref[i]) <= tolerance;
  return static_cast<double>(hit) / pred.size();
}

std::optional<double> DurCorr(std::span<const int> pred, std::span<const int> ref) {
  CheckLengths("dur_corr", pred, ref);
  std::vector<double> p(pred.begin(), pred.end()), r(ref.begin(), ref.end());
  return Pearson(p, r);
}

std::vector<F0Point> F0Track(std::span<const AcousticFrame> frames, double voicing_threshold) {
  std::vector<F0Point> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    out.push_back({std::exp(f.log_f0()), f.pitch_corr() >= voicing_threshold});
  }
  return out;
}

MetricsReport EvaluateFeatures(std::span<const AcousticFrame> pred,
                               std::span<const AcousticFrame> ref,
                               const MetricsConfig& config) {
  CheckLengths("evaluate", pred, ref);
  MetricsReport report;
  report.config = config;
  auto p = F0Track(pred, config.voicing_threshold);
  auto r = F0Track(ref, config.voicing_threshold);
  report.f0_rmse = F0Rmse(p, r);
  report.f0_corr = F0Corr(p, r);
  report.vuv_error = VuvError(p, r);
  std::vector<BfccFrame> pb, rb;
  for (const auto& f : pred) {
    BfccFrame b;
    for (int i = 0; i < kBfccDims; ++i) b[i] = f.bfcc(i);
    pb.push_back(b);
  }
  for (const auto& f : ref) {
    BfccFrame b;
    for (int i = 0; i < kBfccDims; ++i) b[i] = f.bfcc(i);
    rb.push_back(b);
  }
  report.bfccd = Bfccd(pb, rb);
  return report;
}

MetricsReport EvaluateDurations(std::span<const int> pred, std::span<const int> ref,
                                const MetricsConfig& config) {
  MetricsReport report;
  report.config = config;
  report.dur_acc = DurAcc(pred, ref, config.dur_tolerance);
  report.dur_corr = DurCorr(pred, ref);
  return report;
}

std::string MetricsReport::ToJson() const {
  nlohmann::ordered_json j;
  auto put = [&j](const char* key, const std::optional<double>& v) {
    j[key] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  put("f0_rmse", f0_rmse);
  put("f0_corr", f0_corr);
  put("vuv_error", vuv_error);
  put("bfccd", bfccd);
  put("dur_acc", dur_acc);
  put("dur_corr", dur_corr);
  j["config"] = {{"dur_tolerance", config.dur_tolerance},
                 {"voicing_threshold", config.voicing_threshold}};
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::FromJson(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("metrics report: ") + e.what());
  }
  MetricsReport r;
  auto get = [&j](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
  };
  try {
    r.f0_rmse = get("f0_rmse");
    r.f0_corr = get("f0_corr");
    r.vuv_error = get("vuv_error");
    r.bfccd = get("bfccd");
    r.dur_acc = get("dur_acc");
    r.dur_corr = get("dur_corr");
    if (j.contains("config")) {
      r.config.dur_tolerance = j["config"].value("dur_tolerance", 5);
      r.config.voicing_threshold = j["config"].value("voicing_threshold", 0.3);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("metrics report: ") + e.what());
  }
  return r;
}

}  // namespace warbler
