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

// WAV and feature-file readers/writers.

#include <algorithm>
#include <cmath>
#include <optional>

#include <json.hpp>

#include "binary_io.h"
#include "warbler/dsp.h"
#include "warbler/error.h"

namespace warbler {

namespace {
constexpr std::string_view kFeatureMagic = "WSFEAT1";
}

Waveform DecodeWav(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" ||
      bytes.substr(8, 4) != "WAVE") {
    throw Error(ErrorKind::kParse, "wav: not a RIFF/WAVE file");
  }
  io::ByteReader r(bytes, "wav");
  r.Raw(12);
  std::optional<std::uint32_t> rate;
  std::string_view data;
  bool have_data = false;
  while (r.remaining() >= 8) {
    std::string id(r.Raw(4));
    std::uint32_t size = r.U32();
    if (size > r.remaining()) size = static_cast<std::uint32_t>(r.remaining());
    std::string_view chunk = r.Raw(size);
    if (size & 1 && r.remaining() > 0) r.Raw(1);
    if (id == "fmt ") {
      io::ByteReader fmt(chunk, "wav fmt chunk");
      std::uint16_t format = fmt.U16();
      std::uint16_t channels = fmt.U16();
      rate = fmt.U32();
      fmt.U32();  // byte rate
      fmt.U16();  // block align
      std::uint16_t bits = fmt.U16();
      if (format != 1 || bits != 16) {
        throw Error(ErrorKind::kValidation, "wav: only PCM16 is supported");
      }
      if (channels != 1) {
        throw Error(ErrorKind::kValidation, "wav: only mono is supported");
      }
    } else if (id == "data") {
      data = chunk;
      have_data = true;
    }
  }
  if (!rate || !have_data) {
    throw Error(ErrorKind::kParse, "wav: missing fmt or data chunk");
  }
  if (*rate != static_cast<std::uint32_t>(kSampleRate)) {
    throw Error(ErrorKind::kValidation,
                "wav: sample rate " + std::to_string(*rate) +
                    " Hz rejected; resample to 24000 Hz first");
  }
  Waveform w;
  w.sample_rate = kSampleRate;
  io::ByteReader samples(data, "wav data");
  w.samples.reserve(data.size() / 2);
  while (samples.remaining() >= 2) {
    auto v = static_cast<std::int16_t>(samples.U16());
    w.samples.push_back(v / 32768.0);
  }
  return w;
}

Waveform ReadWav(const std::string& path) { return DecodeWav(io::ReadFile(path)); }

std::string EncodeWav(const Waveform& w) {
  if (w.sample_rate != kSampleRate) {
    throw Error(ErrorKind::kValidation, "wav: only 24000 Hz output is supported");
  }
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  io::ByteWriter out;
  out.Raw("RIFF");
  out.U32(36 + data_bytes);
  out.Raw("WAVE");
  out.Raw("fmt ");
  out.U32(16);
  out.U16(1);
  out.U16(1);
  out.U32(kSampleRate);
  out.U32(kSampleRate * 2);
  out.U16(2);
  out.U16(16);
  out.Raw("data");
  out.U32(data_bytes);
  for (double s : w.samples) {
    double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32767.0);
    out.U16(static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  return out.bytes();
}

void WriteWav(const std::string& path, const Waveform& w) {
  io::WriteFile(path, EncodeWav(w));
}

void WriteFeatureFile(const std::string& path,
                      std::span<const AcousticFrame> frames) {
  io::ByteWriter out;
  out.Raw(kFeatureMagic);
  out.U32(static_cast<std::uint32_t>(frames.size()));
  out.U32(kFeatureDims);
  for (const auto& f : frames) {
    for (double v : f.v) out.F32(static_cast<float>(v));
  }
  io::WriteFile(path, out.bytes());
}

std::vector<AcousticFrame> ReadFeatureFile(const std::string& path) {
  std::string bytes = io::ReadFile(path);
  io::ByteReader r(bytes, "feature file " + path);
  r.Expect(kFeatureMagic);
  std::uint32_t frames = r.U32();
  std::uint32_t dim = r.U32();
  if (dim != static_cast<std::uint32_t>(kFeatureDims)) {
    throw Error(ErrorKind::kShape, "feature file dim " + std::to_string(dim) +
                                       ", expected 26");
  }
  std::vector<AcousticFrame> out(frames);
  for (auto& f : out) {
    for (double& v : f.v) v = r.F32();
  }
  if (!r.done()) throw Error(ErrorKind::kParse, "feature file: trailing bytes");
  return out;
}

std::string NormStatsToJson(const NormStats& stats) {
  nlohmann::json j;
  j["min"] = stats.min;
  j["max"] = stats.max;
  return j.dump();
}

NormStats NormStatsFromJson(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("norm stats: ") + e.what());
  }
  auto mn = j.value("min", std::vector<double>{});
  auto mx = j.value("max", std::vector<double>{});
  if (mn.size() != kFeatureDims || mx.size() != kFeatureDims) {
    throw Error(ErrorKind::kShape, "norm stats: expected 26 min and max values");
  }
  NormStats stats;
  for (int d = 0; d < kFeatureDims; ++d) {
    if (mx[d] < mn[d]) {
      throw Error(ErrorKind::kValidation, "norm stats: max < min in dim " +
                                              std::to_string(d));
    }
    stats.min[d] = mn[d];
    stats.max[d] = mx[d];
  }
  return stats;
}

}  // namespace warbler
