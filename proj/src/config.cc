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

#include "warbler/config.h"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>
#include <variant>
#include <vector>

#include "binary_io.h"
#include "warbler/error.h"

namespace warbler {
namespace {

using Slot = std::variant<int*, std::uint64_t*, double*, bool*, std::string*>;

struct Binding {
  std::string key;  // "section.name" or "name" at top level
  Slot slot;
};

std::vector<Binding> Bindings(RunConfig& c) {
  auto& d = c.dsp;
  auto& dm = c.duration_model;
  auto& dt = c.duration_train;
  auto& am = c.acoustic_model;
  auto& at = c.acoustic_train;
  auto& s = c.synth;
  return {
      {"schema_version", &c.schema_version},
      {"seed", &c.seed},
      {"paths.lexicon", &c.paths.lexicon},
      {"sequence.silence_merge_seconds", &c.silence_merge_seconds},
      {"dsp.hop", &d.hop},
      {"dsp.window", &d.window},
      {"dsp.fft_size", &d.fft_size},
      {"dsp.band_max_hz", &d.band_max_hz},
      {"dsp.bfcc_bands", &c.bfcc_bands},
      {"dsp.lpc_order", &c.lpc_order},
      {"dsp.log_floor", &d.log_floor},
      {"dsp.pitch_window", &d.pitch_window},
      {"dsp.min_lag", &d.min_lag},
      {"dsp.max_lag", &d.max_lag},
      {"dsp.voicing_threshold", &d.voicing_threshold},
      {"dsp.octave_guard", &d.octave_guard},
      {"dsp.unvoiced_log_f0_hz", &d.unvoiced_log_f0_hz},
      {"dsp.lag_window_hz", &d.lag_window_hz},
      {"dsp.noise_floor", &d.noise_floor},
      {"vocoder.gru_a_units", &c.vocoder_gru_a_units},
      {"duration.ph_dim", &dm.ph_dim},
      {"duration.pt_dim", &dm.pt_dim},
      {"duration.pi_dim", &dm.pi_dim},
      {"duration.sr_dim", &dm.sr_dim},
      {"duration.bt_dim", &dm.bt_dim},
      {"duration.layers", &dm.layers},
      {"duration.hidden", &dm.hidden},
      {"duration.epochs", &dt.epochs},
      {"duration.lr", &dt.lr},
      {"duration.final_lr_fraction", &dt.final_lr_fraction},
      {"duration.use_syllable_term", &dt.use_syllable_term},
      {"duration.holdout_fraction", &dt.holdout_fraction},
      {"duration.clip_norm", &dt.clip_norm},
      {"duration.initial_cap_frames", &c.initial_cap_frames},
      {"acoustic.ph_dim", &am.ph_dim},
      {"acoustic.pt_dim", &am.pt_dim},
      {"acoustic.pi_dim", &am.pi_dim},
      {"acoustic.sr_dim", &am.sr_dim},
      {"acoustic.dim", &am.dim},
      {"acoustic.heads", &am.heads},
      {"acoustic.encoder_blocks", &am.encoder_blocks},
      {"acoustic.decoder_blocks", &am.decoder_blocks},
      {"acoustic.kernel", &am.kernel},
      {"acoustic.filter", &am.filter},
      {"acoustic.grl_lambda", &am.grl_lambda},
      {"acoustic.grl_reverse", &am.grl_reverse},
      {"acoustic.pitch_weight", &am.pitch_weight},
      {"acoustic.epochs", &at.epochs},
      {"acoustic.lr", &at.lr},
      {"acoustic.final_lr_fraction", &at.final_lr_fraction},
      {"acoustic.weighted", &at.weighted},
      {"acoustic.progressive", &at.progressive},
      {"acoustic.dat", &at.dat},
      {"acoustic.clip_norm", &at.clip_norm},
      {"acoustic.holdout_fraction", &at.holdout_fraction},
      {"augment.pause_frames", &c.pause_frames},
      {"augment.transpose", &c.transpose},
      {"metrics.dur_tolerance", &c.metrics.dur_tolerance},
      {"metrics.voicing_threshold", &c.metrics.voicing_threshold},
      {"synth.singers", &s.singers},
      {"synth.songs", &s.songs},
      {"synth.min_phrases", &s.min_phrases},
      {"synth.max_phrases", &s.max_phrases},
      {"synth.min_syllables", &s.min_syllables},
      {"synth.max_syllables", &s.max_syllables},
      {"synth.melisma_probability", &s.melisma_probability},
      {"synth.legato_probability", &s.legato_probability},
      {"synth.min_midi", &s.min_midi},
      {"synth.max_midi", &s.max_midi},
  };
}

std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string_view StripComment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

template <typename T>
bool ParseNumber(std::string_view v, T& out) {
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  return ec == std::errc() && ptr == end;
}

void Assign(const Slot& slot, std::string_view v, const std::string& where) {
  auto bad = [&](const char* want) {
    return Error(ErrorKind::kConfig, where + ": expected " + want + ", got '" + std::string(v) + "'");
  };
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (v == "true") *p = true;
          else if (v == "false") *p = false;
          else throw bad("a boolean");
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (v.size() < 2 || v.front() != '"' || v.back() != '"') throw bad("a quoted string");
          *p = std::string(v.substr(1, v.size() - 2));
        } else if constexpr (std::is_same_v<T, double>) {
          if (!ParseNumber(v, *p)) throw bad("a number");
        } else {
          if (!ParseNumber(v, *p)) throw bad("an integer");
        }
      },
      slot);
}

std::string Render(const Slot& slot) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return "\"" + *p + "\"";
        } else if constexpr (std::is_same_v<T, double>) {
          char buf[64];
          const auto r = std::to_chars(buf, buf + sizeof(buf), *p);
          std::string s(buf, r.ptr);
          if (s.find_first_of(".eE") == std::string::npos) s += ".0";
          return s;
        } else {
          return std::to_string(*p);
        }
      },
      slot);
}

}  // namespace

void RunConfig::ApplySeed() {
  duration_train.seed = seed;
  acoustic_train.seed = seed;
  synth.seed = seed;
}

void RunConfig::Validate() const {
  if (schema_version != kConfigSchemaVersion) {
    throw Error(ErrorKind::kConfig, "unsupported schema_version " + std::to_string(schema_version));
  }
  if (bfcc_bands != kBfccDims || lpc_order != kLpcOrder) {
    throw Error(ErrorKind::kConfig, "dsp.bfcc_bands and dsp.lpc_order are fixed at " +
                                        std::to_string(kBfccDims) + " and " +
                                        std::to_string(kLpcOrder));
  }
  if (silence_merge_seconds < 0.0) {
    throw Error(ErrorKind::kConfig, "sequence.silence_merge_seconds must be >= 0");
  }
  if (initial_cap_frames < 0 || pause_frames < 1) {
    throw Error(ErrorKind::kConfig, "duration.initial_cap_frames must be >= 0 and "
                                    "augment.pause_frames >= 1");
  }
  if (metrics.dur_tolerance < 0) throw Error(ErrorKind::kConfig, "metrics.dur_tolerance must be >= 0");
  dsp.Validate();
  duration_model.Validate();
  acoustic_model.Validate();
}

RunConfig ParseRunConfig(std::string_view text) {
  RunConfig config;
  auto bindings = Bindings(config);
  std::set<std::string> sections, seen;
  for (const auto& b : bindings) {
    const auto dot = b.key.find('.');
    if (dot != std::string::npos) sections.insert(b.key.substr(0, dot));
  }
  bool has_version = false;
  std::string section;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = "config line " + std::to_string(line_no);
    std::string_view line = Trim(StripComment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::kConfig, where + ": malformed section header");
      section = std::string(Trim(line.substr(1, line.size() - 2)));
      if (!sections.count(section)) {
        throw Error(ErrorKind::kConfig, where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorKind::kConfig, where + ": expected key = value");
    const std::string name(Trim(line.substr(0, eq)));
    const std::string_view value = Trim(line.substr(eq + 1));
    const std::string key = section.empty() ? name : section + "." + name;
    auto it = std::find_if(bindings.begin(), bindings.end(),
                           [&key](const Binding& b) { return b.key == key; });
    if (it == bindings.end()) throw Error(ErrorKind::kConfig, where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw Error(ErrorKind::kConfig, where + ": duplicate key '" + key + "'");
    Assign(it->slot, value, where + " (" + key + ")");
    if (key == "schema_version") has_version = true;
  }
  if (!has_version) throw Error(ErrorKind::kConfig, "config is missing schema_version");
  config.ApplySeed();
  config.Validate();
  return config;
}

RunConfig LoadRunConfig(const std::string& path) {
  try {
    return ParseRunConfig(io::ReadFile(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::string FormatRunConfig(const RunConfig& config) {
  RunConfig copy = config;
  std::ostringstream out;
  std::string section;
  for (const auto& b : Bindings(copy)) {
    const auto dot = b.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : b.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? b.key : b.key.substr(dot + 1);
    if (sec != section) {
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    out << name << " = " << Render(b.slot) << "\n";
  }
  return out.str();
}

}  // namespace warbler
