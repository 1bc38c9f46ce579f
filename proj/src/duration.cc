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

#include "warbler/duration.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "warbler/error.h"
#include "warbler/metrics.h"
#include "warbler/phonemes.h"

namespace warbler {

using nn::Tape;
using nn::Tensor;
using nn::Var;

void DurationModelConfig::Validate() const {
  for (int v : {ph_dim, pt_dim, pi_dim, sr_dim, bt_dim, layers, hidden}) {
    if (v <= 0) throw Error(ErrorKind::kConfig, "duration model dims must be positive");
  }
}

namespace {

nlohmann::ordered_json ConfigJson(const DurationModelConfig& c) {
  return {{"ph_dim", c.ph_dim}, {"pt_dim", c.pt_dim}, {"pi_dim", c.pi_dim},
          {"sr_dim", c.sr_dim}, {"bt_dim", c.bt_dim}, {"layers", c.layers},
          {"hidden", c.hidden}};
}

void CheckIds(std::span<const PhonemeRow> rows) {
  if (rows.empty()) throw Error(ErrorKind::kValidation, "duration model: no rows");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.ph < 0 || r.ph >= PhonemeVocabSize()) {
      throw Error(ErrorKind::kValidation,
                  "unknown phoneme id " + std::to_string(r.ph) + " at row " + std::to_string(i));
    }
    if (r.pitch_id() < 0 || r.pitch_id() >= kPitchVocabSize) {
      throw Error(ErrorKind::kValidation, "pitch id out of range at row " + std::to_string(i));
    }
  }
}

}  // namespace

DurationModel::DurationModel(const DurationModelConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.Validate();
  nn::Rng rng(seed);
  ph_ = nn::Embedding::Create(params_, "dur/emb_ph", PhonemeVocabSize(), config_.ph_dim, rng);
  pt_ = nn::Embedding::Create(params_, "dur/emb_pt", kPhonemeTypeCount, config_.pt_dim, rng);
  pi_ = nn::Embedding::Create(params_, "dur/emb_pi", kPitchVocabSize, config_.pi_dim, rng);
  sr_ = nn::Embedding::Create(params_, "dur/emb_sr", kSlurCount, config_.sr_dim, rng);
  bt_ = nn::Linear::Create(params_, "dur/proj_bt", 1, config_.bt_dim, rng);
  const int in =
      config_.ph_dim + config_.pt_dim + config_.pi_dim + config_.sr_dim + config_.bt_dim;
  norm_ = nn::LayerNormLayer::Create(params_, "dur/norm", in);
  lstm_ = nn::BiLstm::Create(params_, "dur/blstm", in, config_.hidden, config_.layers, rng);
  head_ = nn::Linear::Create(params_, "dur/head", 2 * config_.hidden, 1, rng);
}

Var DurationModel::Forward(Tape& tape, std::span<const PhonemeRow> rows) const {
  CheckIds(rows);
  const int n = static_cast<int>(rows.size());
  std::vector<int> ph(n), pt(n), pi(n), sr(n);
  Tensor log_bt(n, 1);
  for (int i = 0; i < n; ++i) {
    ph[i] = rows[i].ph;
    pt[i] = static_cast<int>(rows[i].pt);
    pi[i] = rows[i].pitch_id();
    sr[i] = static_cast<int>(rows[i].sr);
    log_bt(i, 0) = std::log(static_cast<double>(std::max(rows[i].bt, 1)));
  }
  const Var parts[] = {ph_.Apply(tape, ph), pt_.Apply(tape, pt), pi_.Apply(tape, pi),
                       sr_.Apply(tape, sr), bt_.Apply(tape, tape.Constant(std::move(log_bt)))};
  Var x = norm_.Apply(tape, nn::ConcatCols(parts));
  return head_.Apply(tape, lstm_.Apply(tape, x));
}

std::vector<double> DurationModel::PredictLogDurations(std::span<const PhonemeRow> rows) const {
  Tape tape;
  const Tensor& out = Forward(tape, rows).value();
  return {out.values().begin(), out.values().end()};
}

void DurationModel::Save(const std::string& path) const {
  nlohmann::ordered_json manifest = {{"kind", "duration"},
                                     {"phoneme_vocab_version", kPhonemeVocabVersion},
                                     {"config", ConfigJson(config_)}};
  nn::SaveCheckpoint(path, params_, manifest.dump());
}

DurationModel DurationModel::Load(const std::string& path) {
  nn::Checkpoint ckpt = nn::LoadCheckpoint(path);
  nlohmann::json m;
  DurationModelConfig c;
  try {
    m = nlohmann::json::parse(ckpt.manifest_json);
    if (m.value("kind", "") != "duration") {
      throw Error(ErrorKind::kValidation, path + " is not a duration model checkpoint");
    }
    if (m.value("phoneme_vocab_version", -1) != kPhonemeVocabVersion) {
      throw Error(ErrorKind::kValidation, path + ": phoneme vocabulary version mismatch");
    }
    const auto& j = m.at("config");
    c.ph_dim = j.at("ph_dim");
    c.pt_dim = j.at("pt_dim");
    c.pi_dim = j.at("pi_dim");
    c.sr_dim = j.at("sr_dim");
    c.bt_dim = j.at("bt_dim");
    c.layers = j.at("layers");
    c.hidden = j.at("hidden");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path + ": bad checkpoint manifest: " + e.what());
  }
  DurationModel model(c, 0);
  nn::ApplyCheckpoint(ckpt, model.params_);
  return model;
}

namespace {

void CheckSyllableMap(const SyllableMap& syllables, std::size_t n) {
  std::size_t expect = 0;
  for (const auto& [b, e] : syllables) {
    if (b >= e) throw Error(ErrorKind::kValidation, "multiscale loss: empty syllable group");
    if (static_cast<std::size_t>(b) != expect) {
      throw Error(ErrorKind::kValidation,
                  "multiscale loss: syllable groups must partition the rows contiguously");
    }
    expect = e;
  }
  if (expect != n) {
    throw Error(ErrorKind::kValidation, "multiscale loss: syllable groups do not cover all rows");
  }
}

}  // namespace

Var MultiscaleLoss(Var pred, std::span<const double> gt, const SyllableMap& syllables,
                   bool use_syllable_term) {
  Tape& tape = *pred.tape;
  const int n = pred.rows();
  if (pred.cols() != 1 || static_cast<std::size_t>(n) != gt.size() || n == 0) {
    throw Error(ErrorKind::kShape, "multiscale loss: pred " + pred.value().ShapeString() +
                                       " vs " + std::to_string(gt.size()) + " targets");
  }
  CheckSyllableMap(syllables, gt.size());
  Var diff = nn::Sub(tape.Constant(Tensor(n, 1, std::vector<double>(gt.begin(), gt.end()))),
                     pred);
  Var term2 = nn::Mean(nn::Mul(diff, diff));
  if (!use_syllable_term) return term2;
  const int m = static_cast<int>(syllables.size());
  Tensor membership(m, n);
  for (int s = 0; s < m; ++s) {
    for (int i = syllables[s].first; i < syllables[s].second; ++i) membership(s, i) = 1.0;
  }
  Var sums = nn::MatMul(tape.Constant(std::move(membership)), diff);
  Var term1 = nn::Mean(nn::Mul(sums, sums));
  return nn::Add(term1, term2);
}

MultiscaleTerms MultiscaleLossTerms(std::span<const double> pred, std::span<const double> gt,
                                    const SyllableMap& syllables) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw Error(ErrorKind::kShape, "multiscale loss: length mismatch");
  }
  CheckSyllableMap(syllables, gt.size());
  MultiscaleTerms t;
  for (std::size_t i = 0; i < gt.size(); ++i) t.term2 += (gt[i] - pred[i]) * (gt[i] - pred[i]);
  t.term2 /= gt.size();
  for (const auto& [b, e] : syllables) {
    double s = 0.0;
    for (int i = b; i < e; ++i) s += gt[i] - pred[i];
    t.term1 += s * s;
  }
  t.term1 /= syllables.size();
  return t;
}

std::vector<int> ApportionLargestRemainder(std::span<const double> weights, int total) {
  if (total < 0) throw Error(ErrorKind::kValidation, "apportion: negative total");
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorKind::kValidation, "apportion: weights must be finite and >= 0");
    }
    sum += w;
  }
  if (sum <= 0.0) throw Error(ErrorKind::kValidation, "apportion: weights sum to zero");
  const std::size_t n = weights.size();
  std::vector<int> out(n);
  std::vector<double> frac(n);
  int assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = weights[i] * total / sum;
    out[i] = static_cast<int>(std::floor(quota));
    frac[i] = quota - out[i];
    assigned += out[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&frac](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % n, ++assigned) ++out[order[k]];
  return out;
}

std::vector<int> PostprocessDurations(std::span<const double> pred_frames,
                                      std::span<const PhonemeRow> rows, int initial_cap) {
  if (pred_frames.size() != rows.size()) {
    throw Error(ErrorKind::kShape, "postprocess: " + std::to_string(pred_frames.size()) +
                                       " predictions for " + std::to_string(rows.size()) +
                                       " rows");
  }
  std::vector<PhonemeRow> row_vec(rows.begin(), rows.end());
  std::vector<int> out(rows.size());
  for (const auto& [b, e] : SyllableRanges(row_vec)) {
    int d = 0;
    bool silence = true;
    for (int i = b; i < e; ++i) {
      d += rows[i].nominal_dur;
      silence = silence && rows[i].is_silence();
    }
    if (silence) {
      for (int i = b; i < e; ++i) out[i] = rows[i].nominal_dur;
      continue;
    }
    double sum = 0.0;
    for (int i = b; i < e; ++i) sum += pred_frames[i];
    if (!(sum > 0.0)) {
      throw Error(ErrorKind::kValidation, "postprocess: predicted durations of syllable " +
                                              std::to_string(rows[b].syllable_index) +
                                              " sum to zero");
    }
    auto scaled = ApportionLargestRemainder(pred_frames.subspan(b, e - b), d);
    int excess = 0;
    std::vector<int> finals;
    for (int i = b; i < e; ++i) {
      int& v = scaled[i - b];
      if (rows[i].pt == PhonemeType::kInitial) {
        if (v > initial_cap) {
          excess += v - initial_cap;
          v = initial_cap;
        }
      } else {
        finals.push_back(i - b);
      }
    }
    if (excess > 0) {
      if (finals.empty()) {
        throw Error(ErrorKind::kValidation, "postprocess: syllable without a final");
      }
      std::vector<double> w;
      double wsum = 0.0;
      for (int k : finals) {
        w.push_back(scaled[k]);
        wsum += scaled[k];
      }
      if (wsum <= 0.0) std::fill(w.begin(), w.end(), 1.0);
      auto extra = ApportionLargestRemainder(w, excess);
      for (std::size_t k = 0; k < finals.size(); ++k) scaled[finals[k]] += extra[k];
    }
    for (int i = b; i < e; ++i) out[i] = scaled[i - b];
  }
  return out;
}

std::string DurationTrainReport::ToJson() const {
  nlohmann::ordered_json j;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : epochs) j["epochs"].push_back({{"epoch", e.epoch}, {"loss", e.loss}});
  auto eval = [](const DurationEval& d) {
    return nlohmann::ordered_json{{"dur_acc", d.dur_acc},
                                  {"dur_corr", d.dur_corr},
                                  {"syllable_sum_mae", d.syllable_sum_mae},
                                  {"rows", d.rows}};
  };
  j["train_utterances"] = train_utterances;
  j["heldout_utterances"] = heldout_utterances;
  j["train"] = eval(train);
  j["heldout"] = eval(heldout);
  j["loss"] = epochs.empty() ? 0.0 : epochs.back().loss;
  j["dur_acc"] = heldout_utterances > 0 ? heldout.dur_acc : train.dur_acc;
  j["dur_corr"] = heldout_utterances > 0 ? heldout.dur_corr : train.dur_corr;
  return j.dump(2) + "\n";
}

namespace {

std::vector<double> GroundTruth(const Utterance& utt) {
  std::vector<double> gt;
  for (std::size_t i = 0; i < utt.rows.size(); ++i) {
    if (!utt.rows[i].gt_dur) {
      throw Error(ErrorKind::kValidation, "utterance " + utt.id + " row " + std::to_string(i) +
                                              " has no ground-truth duration");
    }
    gt.push_back(*utt.rows[i].gt_dur);
  }
  return gt;
}

}  // namespace

void InitDurationOutputBias(DurationModel& model, std::span<const Utterance> corpus) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& utt : corpus) {
    for (double g : GroundTruth(utt)) {
      sum += std::log(std::max(g, 1.0));
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorKind::kValidation, "duration corpus is empty");
  model.output_bias().value[0] = sum / n;
}

DurationEval EvaluateDuration(const DurationModel& model, std::span<const Utterance> corpus,
                              int dur_acc_tolerance) {
  DurationEval ev;
  std::vector<int> pred_all, gt_all;
  double sum_err = 0.0;
  int syllables = 0;
  for (const auto& utt : corpus) {
    auto gt = GroundTruth(utt);
    auto logd = model.PredictLogDurations(utt.rows);
    std::vector<double> pred(logd.size());
    for (std::size_t i = 0; i < logd.size(); ++i) pred[i] = std::exp(logd[i]);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred_all.push_back(static_cast<int>(std::llround(pred[i])));
      gt_all.push_back(static_cast<int>(gt[i]));
    }
    for (const auto& [b, e] : SyllableRanges(utt.rows)) {
      if (utt.rows[b].is_silence()) continue;
      double s = 0.0;
      for (int i = b; i < e; ++i) s += pred[i] - gt[i];
      sum_err += std::abs(s);
      ++syllables;
    }
  }
  if (pred_all.empty()) return ev;
  ev.rows = static_cast<int>(pred_all.size());
  ev.dur_acc = DurAcc(pred_all, gt_all, dur_acc_tolerance);
  ev.dur_corr = DurCorr(pred_all, gt_all).value_or(0.0);
  ev.syllable_sum_mae = syllables > 0 ? sum_err / syllables : 0.0;
  return ev;
}

DurationTrainReport TrainDuration(DurationModel& model, std::span<const Utterance> corpus,
                                  const DurationTrainOptions& options) {
  if (corpus.empty()) throw Error(ErrorKind::kValidation, "duration corpus is empty");
  if (options.epochs < 0 || options.lr < 0.0) {
    throw Error(ErrorKind::kConfig, "epochs and lr must be non-negative");
  }
  std::vector<std::vector<double>> targets;
  std::vector<SyllableMap> maps;
  for (const auto& utt : corpus) {
    targets.push_back(GroundTruth(utt));
    maps.push_back(SyllableRanges(utt.rows));
  }

  nn::Rng rng(options.seed);
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  rng.Shuffle(order);
  int n_hold = 0;
  if (options.holdout_fraction > 0.0 && corpus.size() >= 2) {
    n_hold = std::max(1, static_cast<int>(std::llround(options.holdout_fraction *
                                                       static_cast<double>(corpus.size()))));
    n_hold = std::min(n_hold, static_cast<int>(corpus.size()) - 1);
  }
  std::vector<int> held(order.begin(), order.begin() + n_hold);
  std::vector<int> train(order.begin() + n_hold, order.end());
  std::sort(held.begin(), held.end());
  std::sort(train.begin(), train.end());

  DurationTrainReport report;
  report.train_utterances = static_cast<int>(train.size());
  report.heldout_utterances = n_hold;
  nn::Adam adam(options.lr);
  const double total_steps = static_cast<double>(options.epochs) * static_cast<double>(train.size());
  int step = 0;
  model.params().ZeroGrad();
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::vector<int> epoch_order = train;
    rng.Shuffle(epoch_order);
    double total = 0.0;
    for (int idx : epoch_order) {
      adam.set_lr(nn::CosineLr(options.lr, options.final_lr_fraction, step++, total_steps));
      Tape tape;
      Var pred = nn::Exp(model.Forward(tape, corpus[idx].rows));
      Var loss = MultiscaleLoss(pred, targets[idx], maps[idx], options.use_syllable_term);
      total += loss.value().item();
      tape.Backward(loss);
      if (options.clip_norm > 0.0) nn::ClipGradNorm(model.params(), options.clip_norm);
      adam.Step(model.params());
      model.params().ZeroGrad();
    }
    report.epochs.push_back({epoch, total / static_cast<double>(epoch_order.size())});
  }

  auto subset = [&corpus](const std::vector<int>& ids) {
    std::vector<Utterance> out;
    for (int i : ids) out.push_back(corpus[i]);
    return out;
  };
  report.train = EvaluateDuration(model, subset(train), options.dur_acc_tolerance);
  if (n_hold > 0) {
    report.heldout = EvaluateDuration(model, subset(held), options.dur_acc_tolerance);
  }
  return report;
}

}  // namespace warbler
