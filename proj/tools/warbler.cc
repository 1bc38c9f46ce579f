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

// warbler: command-line front end of the training-data and model pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "warbler/acoustic.h"
#include "warbler/augment.h"
#include "warbler/config.h"
#include "warbler/corpus.h"
#include "warbler/dsp.h"
#include "warbler/duration.h"
#include "warbler/error.h"
#include "warbler/metrics.h"
#include "warbler/score.h"
#include "warbler/sequence.h"
#include "warbler/synth.h"

namespace warbler {
namespace {

namespace fs = std::filesystem;

void WriteText(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

bool EndsWith(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Rows go to TSV on stdout or for *.tsv paths, binary otherwise.
void WriteRows(const std::string& path, const Utterance& utt,
               const std::vector<int>* durations = nullptr) {
  if (path.empty() || path == "-" || EndsWith(path, ".tsv") || durations) {
    WriteText(path, RowsToTsv(utt, durations));
  } else {
    WriteRowsFile(path, utt);
  }
}

std::optional<Lexicon> MaybeLexicon(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return Lexicon::Load(path);
}

struct AcousticMetadata {
  NormStats stats;
  std::vector<std::string> singers;
};

std::string MetadataJson(const AcousticMetadata& m) {
  nlohmann::ordered_json j;
  j["norm_stats"] = nlohmann::ordered_json::parse(NormStatsToJson(m.stats));
  j["singers"] = m.singers;
  return j.dump();
}

AcousticMetadata ParseMetadata(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    AcousticMetadata m;
    m.stats = NormStatsFromJson(j.at("norm_stats").dump());
    m.singers = j.at("singers").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("acoustic checkpoint metadata: ") + e.what());
  }
}

void PrintErrorLine(std::string_view kind, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = {{"kind", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int Main(int argc, char** argv) {
  CLI::App app{"warbler: singing-voice training data and model pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  bool quiet = false;
  app.add_option("--config", config_path, "Run configuration file (schema_version = 1)")
      ->check(CLI::ExistingFile);
  app.add_flag("-q,--quiet", quiet, "Silence warnings");

  RunConfig cfg;
  auto load_config = [&]() {
    if (!config_path.empty()) cfg = LoadRunConfig(config_path);
    cfg.ApplySeed();
    cfg.Validate();
    if (quiet) SetWarningsEnabled(false);
  };

  // print-config
  auto* print_config = app.add_subcommand("print-config", "Print the effective configuration");

  // parse
  std::string score_path, lexicon_path, out_path;
  auto* parse = app.add_subcommand("parse", "Score to phoneme rows");
  parse->add_option("score", score_path, "MusicXML score")->required()->check(CLI::ExistingFile);
  parse->add_option("--lexicon", lexicon_path, "Lyric to pinyin lexicon")->check(CLI::ExistingFile);
  parse->add_option("-o,--output", out_path, "Rows file (*.tsv for text; default stdout)");

  // align
  std::string rows_path, intervals_path;
  auto* align = app.add_subcommand("align", "Attach annotated durations to rows");
  align->add_option("rows", rows_path, "Rows file")->required()->check(CLI::ExistingFile);
  align->add_option("intervals", intervals_path, "Interval TSV")->required()->check(CLI::ExistingFile);
  align->add_option("-o,--output", out_path, "Rows file (*.tsv for text; default stdout)");

  // featurize
  std::string wav_path, stats_path, fit_stats_path;
  auto* featurize = app.add_subcommand("featurize", "Audio to WSFEAT1 features");
  featurize->add_option("audio", wav_path, "PCM16 mono 24 kHz WAV")->required()->check(CLI::ExistingFile);
  featurize->add_option("-o,--output", out_path, "Feature file")->required();
  featurize->add_option("--stats", stats_path, "Normalize with these min-max statistics")
      ->check(CLI::ExistingFile);
  featurize->add_option("--fit-stats", fit_stats_path, "Fit statistics on this audio and write them");

  // augment
  std::string manifest_path, mode = "vs", transpose_dir;
  bool transpose = false;
  auto* augment = app.add_subcommand("augment", "Variable-duration segmentation into clips");
  augment->add_option("manifest", manifest_path, "Corpus manifest (JSON lines)")
      ->required()->check(CLI::ExistingFile);
  augment->add_option("--mode", mode, "Augmentation mode")->check(CLI::IsMember({"vs"}));
  augment->add_flag("--transpose", transpose, "Also write scores transposed by +/-1 semitone");
  augment->add_option("--transpose-dir", transpose_dir, "Directory for transposed scores");
  augment->add_option("-o,--output", out_path, "Clip manifest (default stdout)");

  // train-dur
  std::string ckpt_path, report_path;
  bool no_syllable = false;
  auto* train_dur = app.add_subcommand("train-dur", "Train the duration model");
  train_dur->add_option("manifest", manifest_path, "Corpus manifest")->required()->check(CLI::ExistingFile);
  train_dur->add_flag("--no-syllable-loss", no_syllable, "Drop the syllable-sum term");
  train_dur->add_option("-o,--output", ckpt_path, "Checkpoint")->required();
  train_dur->add_option("--report", report_path, "Training report JSON");

  // predict-dur
  bool postprocess = false;
  auto* predict_dur = app.add_subcommand("predict-dur", "Predict phoneme durations");
  predict_dur->add_option("checkpoint", ckpt_path, "Duration checkpoint")->required()->check(CLI::ExistingFile);
  predict_dur->add_option("rows", rows_path, "Rows file")->required()->check(CLI::ExistingFile);
  predict_dur->add_flag("--postprocess", postprocess, "Fit durations to the notes and cap initials");
  predict_dur->add_option("-o,--output", out_path, "Durations TSV (default stdout)");

  // train-ac
  std::string recipe = "pretrain", init_path;
  bool whole_songs = false;
  auto* train_ac = app.add_subcommand("train-ac", "Train the acoustic model");
  train_ac->add_option("manifest", manifest_path, "Corpus manifest with audio")
      ->required()->check(CLI::ExistingFile);
  train_ac->add_option("--recipe", recipe, "pretrain or finetune")
      ->check(CLI::IsMember({"pretrain", "finetune"}));
  train_ac->add_option("--init", init_path, "Checkpoint to fine-tune from")->check(CLI::ExistingFile);
  train_ac->add_flag("--whole-songs", whole_songs, "Train on whole songs instead of VS clips");
  train_ac->add_option("-o,--output", ckpt_path, "Checkpoint")->required();
  train_ac->add_option("--report", report_path, "Training report JSON");

  // synth-features
  std::string ac_path, dur_path, singer;
  auto* synth_features = app.add_subcommand("synth-features", "Durations to denormalized features");
  synth_features->add_option("checkpoint", ac_path, "Acoustic checkpoint")->required()->check(CLI::ExistingFile);
  synth_features->add_option("durations", dur_path, "Durations TSV from predict-dur")
      ->required()->check(CLI::ExistingFile);
  synth_features->add_option("--singer", singer, "Singer id (default: the rows' singer)");
  synth_features->add_option("-o,--output", out_path, "Feature file")->required();

  // evaluate
  std::string pred_path, ref_path, kind;
  auto* evaluate = app.add_subcommand("evaluate", "Objective metrics");
  evaluate->add_option("pred", pred_path, "Prediction")->required()->check(CLI::ExistingFile);
  evaluate->add_option("ref", ref_path, "Reference")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--kind", kind, "dur, f0 or feat")->required()
      ->check(CLI::IsMember({"dur", "f0", "feat"}));
  evaluate->add_option("-o,--output", out_path, "Report JSON (default stdout)");

  // gen-synth-corpus
  std::optional<int> singers, songs;
  std::optional<std::uint64_t> seed;
  bool no_audio = false;
  std::string out_dir;
  auto* gen = app.add_subcommand("gen-synth-corpus", "Generate a synthetic annotated corpus");
  gen->add_option("--singers", singers, "Number of singers");
  gen->add_option("--songs", songs, "Number of songs");
  gen->add_option("--seed", seed, "Random seed");
  gen->add_flag("--no-audio", no_audio, "Skip audio rendering");
  gen->add_option("-o,--output", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) {
      PrintErrorLine("usage", e.what());
      return 2;
    }
    return 0;
  }

  try {
    load_config();
    const DspConfig& dsp = cfg.dsp;
    const auto lex = MaybeLexicon(!lexicon_path.empty() ? lexicon_path : cfg.paths.lexicon);
    const Lexicon* lexicon = lex ? &*lex : nullptr;

    if (*print_config) {
      std::cout << FormatRunConfig(cfg);
      return 0;
    }
    if (*parse) {
      Score score = LoadMusicXml(score_path, lexicon);
      Utterance utt;
      utt.id = fs::path(score_path).stem().string();
      utt.singer_id = score.singer_id.value_or("");
      utt.rows = BuildRows(score);
      WriteRows(out_path, utt);
      return 0;
    }
    if (*align) {
      Utterance utt = LoadRows(rows_path);
      const auto intervals = LoadIntervals(intervals_path);
      utt.rows = AttachGroundTruth(std::move(utt.rows), intervals, cfg.silence_merge_seconds);
      if (!intervals.empty()) {
        utt.span_start = intervals.front().start;
        utt.span_end = intervals.back().end;
      }
      WriteRows(out_path, utt);
      return 0;
    }
    if (*featurize) {
      auto frames = ExtractFeatures(ReadWav(wav_path), dsp);
      if (!fit_stats_path.empty()) WriteText(fit_stats_path, NormStatsToJson(MinMaxFit(frames)));
      if (!stats_path.empty()) frames = Normalize(frames, NormStatsFromJson(ReadText(stats_path)));
      WriteFeatureFile(out_path, frames);
      return 0;
    }
    if (*augment) {
      const auto entries = ReadCorpusManifest(manifest_path);
      std::vector<Utterance> corpus;
      for (const auto& e : entries) {
        corpus.push_back(LoadAnnotatedUtterance(e, lexicon, cfg.silence_merge_seconds));
      }
      WriteText(out_path, ClipManifest(VsAugment(corpus, cfg.pause_frames)));
      if (transpose || cfg.transpose) {
        const fs::path dir = transpose_dir.empty() ? fs::path("transposed") : fs::path(transpose_dir);
        fs::create_directories(dir);
        std::string manifest;
        for (const auto& e : entries) {
          const Score score = LoadMusicXml(e.score, lexicon);
          for (int shift : {-1, 1}) {
            const std::string id = e.id + (shift > 0 ? "_tp1" : "_tm1");
            const fs::path xml = dir / (id + ".xml");
            WriteText(xml.string(), WriteMusicXml(TransposeScore(score, shift)));
            nlohmann::ordered_json j;
            j["id"] = id;
            j["singer"] = e.singer;
            j["score"] = fs::absolute(xml).string();
            j["intervals"] = fs::absolute(e.intervals).string();
            manifest += j.dump() + "\n";
          }
        }
        WriteText((dir / "manifest.jsonl").string(), manifest);
      }
      return 0;
    }
    if (*train_dur) {
      std::vector<Utterance> corpus;
      for (const auto& e : ReadCorpusManifest(manifest_path)) {
        corpus.push_back(LoadAnnotatedUtterance(e, lexicon, cfg.silence_merge_seconds));
      }
      DurationTrainOptions opt = cfg.duration_train;
      if (no_syllable) opt.use_syllable_term = false;
      opt.dur_acc_tolerance = cfg.metrics.dur_tolerance;
      DurationModel model(cfg.duration_model, cfg.seed);
      InitDurationOutputBias(model, corpus);
      const auto report = TrainDuration(model, corpus, opt);
      model.Save(ckpt_path);
      if (!report_path.empty()) WriteText(report_path, report.ToJson());
      return 0;
    }
    if (*predict_dur) {
      const DurationModel model = DurationModel::Load(ckpt_path);
      const Utterance utt = LoadRows(rows_path);
      const auto logd = model.PredictLogDurations(utt.rows);
      std::vector<double> frames(logd.size());
      for (std::size_t i = 0; i < logd.size(); ++i) frames[i] = std::exp(logd[i]);
      std::vector<int> durations;
      if (postprocess) {
        durations = PostprocessDurations(frames, utt.rows, cfg.initial_cap_frames);
      } else {
        for (double f : frames) durations.push_back(static_cast<int>(std::max<long long>(1, std::llround(f))));
      }
      WriteRows(out_path.empty() ? "-" : out_path, utt, &durations);
      return 0;
    }
    if (*train_ac) {
      const auto entries = ReadCorpusManifest(manifest_path);
      AcousticTrainOptions opt = cfg.acoustic_train;
      AcousticModelConfig mc = cfg.acoustic_model;
      AcousticMetadata meta;
      std::vector<std::string> corpus_singers = SingerList(entries);
      if (recipe == "finetune") {
        if (init_path.empty()) throw Error(ErrorKind::kConfig, "finetune recipe requires --init");
        const AcousticModel base = AcousticModel::Load(init_path);
        mc = base.config();
        meta = ParseMetadata(base.metadata());
        if (corpus_singers.size() != 1) {
          throw Error(ErrorKind::kValidation, "finetune recipe expects a single singer");
        }
        // A new singer takes over the first speaker slot.
        auto it = std::find(meta.singers.begin(), meta.singers.end(), corpus_singers[0]);
        if (it == meta.singers.end()) meta.singers[0] = corpus_singers[0];
        opt.recipe = AcousticRecipe::kFinetuneSingle;
        opt.init_checkpoint = init_path;
      } else {
        meta.singers = corpus_singers;
        mc.speakers = static_cast<int>(meta.singers.size());
      }
      auto data = LoadAnnotatedSongs(entries, meta.singers, dsp, lexicon, cfg.silence_merge_seconds);
      if (recipe == "pretrain") meta.stats = FitSongStats(data);
      const auto examples = MakeAcousticExamples(data, meta.stats, !whole_songs, cfg.pause_frames);
      AcousticModel model(mc, cfg.seed);
      model.set_metadata(MetadataJson(meta));
      const auto report = TrainAcoustic(model, examples, opt);
      model.Save(ckpt_path);
      if (!report_path.empty()) WriteText(report_path, report.ToJson());
      return 0;
    }
    if (*synth_features) {
      const AcousticModel model = AcousticModel::Load(ac_path);
      const AcousticMetadata meta = ParseMetadata(model.metadata());
      std::vector<int> durations;
      const Utterance utt = LoadRows(dur_path, &durations);
      if (durations.empty()) throw Error(ErrorKind::kValidation, dur_path + ": no dur column");
      const std::string who = !singer.empty() ? singer : utt.singer_id;
      int speaker = 0;
      auto it = std::find(meta.singers.begin(), meta.singers.end(), who);
      if (it != meta.singers.end()) {
        speaker = static_cast<int>(it - meta.singers.begin());
      } else if (!singer.empty()) {
        throw Error(ErrorKind::kValidation, "unknown singer '" + singer + "'");
      } else {
        Warn("singer '" + who + "' not in checkpoint; using '" + meta.singers[0] + "'");
      }
      const auto frames = model.Synthesize(utt.rows, durations, speaker);
      WriteFeatureFile(out_path, Denormalize(frames, meta.stats));
      return 0;
    }
    if (*evaluate) {
      MetricsReport report;
      if (kind == "dur") {
        auto durations_of = [](const std::string& path) {
          std::vector<int> d;
          const Utterance u = LoadRows(path, &d);
          if (!d.empty()) return d;
          for (const auto& r : u.rows) {
            if (!r.gt_dur) throw Error(ErrorKind::kValidation, path + ": rows lack durations");
            d.push_back(*r.gt_dur);
          }
          return d;
        };
        const auto pred = durations_of(pred_path);
        const auto ref = durations_of(ref_path);
        if (pred.size() != ref.size()) {
          throw Error(ErrorKind::kAlignment, "duration row counts differ: " +
                                                 std::to_string(pred.size()) + " vs " +
                                                 std::to_string(ref.size()));
        }
        report = EvaluateDurations(pred, ref, cfg.metrics);
      } else {
        auto pred = ReadFeatureFile(pred_path);
        auto ref = ReadFeatureFile(ref_path);
        if (pred.size() != ref.size()) {
          Warn("feature lengths differ (" + std::to_string(pred.size()) + " vs " +
               std::to_string(ref.size()) + "); comparing the common prefix");
          const std::size_t n = std::min(pred.size(), ref.size());
          pred.resize(n);
          ref.resize(n);
        }
        report = EvaluateFeatures(pred, ref, cfg.metrics);
        if (kind == "f0") report.bfccd.reset();
      }
      WriteText(out_path, report.ToJson());
      return 0;
    }
    if (*gen) {
      SynthCorpusOptions opt = cfg.synth;
      if (singers) opt.singers = *singers;
      if (songs) opt.songs = *songs;
      if (seed) opt.seed = *seed;
      opt.render_audio = !no_audio;
      const std::string manifest = WriteSynthCorpus(out_dir, opt);
      std::cout << manifest << "\n";
      return 0;
    }
  } catch (const Error& e) {
    PrintErrorLine(ErrorKindName(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    PrintErrorLine("internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace warbler

int main(int argc, char** argv) { return warbler::Main(argc, argv); }
