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

#include "warbler/acoustic.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "warbler/error.h"
#include "warbler/phonemes.h"

namespace warbler {

using nn::Tape;
using nn::Tensor;
using nn::Var;

void AcousticModelConfig::Validate() const {
  for (int v : {ph_dim, pt_dim, pi_dim, sr_dim, dim, heads, encoder_blocks, kernel, filter,
                speakers}) {
    if (v <= 0) throw Error(ErrorKind::kConfig, "acoustic model dims must be positive");
  }
  if (decoder_blocks < 1) throw Error(ErrorKind::kConfig, "need at least one decoder block");
  if (dim % heads != 0) {
    throw Error(ErrorKind::kConfig, "model dim must be divisible by the head count");
  }
  if (grl_lambda < 0.0) throw Error(ErrorKind::kConfig, "grl_lambda must be >= 0");
  if (pitch_weight <= 0.0) throw Error(ErrorKind::kConfig, "pitch_weight must be positive");
}

std::vector<double> FeatureWeights(double pitch_weight) {
  std::vector<double> w(kFeatureDims, 1.0);
  w[kLogF0Dim] = pitch_weight;
  return w;
}

AcousticModel::AcousticModel(const AcousticModelConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.Validate();
  nn::Rng rng(seed);
  const auto& c = config_;
  ph_ = nn::Embedding::Create(params_, "ac/emb_ph", PhonemeVocabSize(), c.ph_dim, rng);
  pt_ = nn::Embedding::Create(params_, "ac/emb_pt", kPhonemeTypeCount, c.pt_dim, rng);
  pi_ = nn::Embedding::Create(params_, "ac/emb_pi", kPitchVocabSize, c.pi_dim, rng);
  sr_ = nn::Embedding::Create(params_, "ac/emb_sr", kSlurCount, c.sr_dim, rng);
  const int in = c.ph_dim + c.pt_dim + c.pi_dim + c.sr_dim;
  in_norm_ = nn::LayerNormLayer::Create(params_, "ac/in_norm", in);
  in_proj_ = nn::Linear::Create(params_, "ac/in_proj", in, c.dim, rng);
  for (int b = 0; b < c.encoder_blocks; ++b) {
    encoder_.push_back(nn::FftBlock::Create(params_, "ac/enc" + std::to_string(b), c.dim,
                                            c.heads, c.filter, c.kernel, rng));
  }
  speaker_ = nn::Embedding::Create(params_, "ac/emb_speaker", c.speakers, c.dim, rng);
  for (int b = 0; b < c.decoder_blocks; ++b) {
    decoder_.push_back(nn::FftBlock::Create(params_, "ac/dec" + std::to_string(b), c.dim,
                                            c.heads, c.filter, c.kernel, rng));
    projections_.push_back(
        nn::Linear::Create(params_, "ac/proj" + std::to_string(b), c.dim, kFeatureDims, rng));
  }
  post1_ = nn::Conv1dLayer::Create(params_, "ac/post1", kFeatureDims, c.dim, c.kernel, rng);
  post2_ = nn::Conv1dLayer::Create(params_, "ac/post2", c.dim, kFeatureDims, c.kernel, rng);
  classifier_ = nn::Linear::Create(params_, "ac/speaker_cls", c.dim, c.speakers, rng);
}

void AcousticModel::set_grl_lambda(double lambda) {
  if (lambda < 0.0) throw Error(ErrorKind::kConfig, "grl_lambda must be >= 0");
  config_.grl_lambda = lambda;
}

void AcousticModel::CheckSpeaker(int speaker) const {
  if (speaker < 0 || speaker >= config_.speakers) {
    throw Error(ErrorKind::kValidation, "speaker id " + std::to_string(speaker) +
                                            " out of range for " +
                                            std::to_string(config_.speakers) + " speakers");
  }
}

Var AcousticModel::Encode(Tape& tape, std::span<const PhonemeRow> rows) const {
  if (rows.empty()) throw Error(ErrorKind::kValidation, "acoustic model: no rows");
  const int n = static_cast<int>(rows.size());
  std::vector<int> ph(n), pt(n), pi(n), sr(n);
  for (int i = 0; i < n; ++i) {
    if (rows[i].ph < 0 || rows[i].ph >= PhonemeVocabSize()) {
      throw Error(ErrorKind::kValidation, "unknown phoneme id " + std::to_string(rows[i].ph) +
                                              " at row " + std::to_string(i));
    }
    ph[i] = rows[i].ph;
    pt[i] = static_cast<int>(rows[i].pt);
    pi[i] = rows[i].pitch_id();
    sr[i] = static_cast<int>(rows[i].sr);
  }
  const Var parts[] = {ph_.Apply(tape, ph), pt_.Apply(tape, pt), pi_.Apply(tape, pi),
                       sr_.Apply(tape, sr)};
  Var x = in_proj_.Apply(tape, in_norm_.Apply(tape, nn::ConcatCols(parts)));
  x = nn::Add(x, tape.Constant(nn::SinusoidalPositions(n, config_.dim)));
  for (const auto& block : encoder_) x = block.Apply(tape, x);
  return x;
}

std::vector<Var> AcousticModel::Decode(Tape& tape, Var frames, int speaker) const {
  CheckSpeaker(speaker);
  if (frames.rows() == 0) throw Error(ErrorKind::kValidation, "decode: no frames");
  const int ids[] = {speaker};
  Var x = nn::Add(frames, tape.Constant(nn::SinusoidalPositions(frames.rows(), config_.dim)));
  x = nn::Add(x, speaker_.Apply(tape, ids));
  std::vector<Var> outs;
  for (std::size_t b = 0; b < decoder_.size(); ++b) {
    x = decoder_[b].Apply(tape, x);
    outs.push_back(projections_[b].Apply(tape, x));
  }
  Var last = outs.back();
  Var residual = post2_.Apply(tape, nn::Tanh(post1_.Apply(tape, last)));
  outs.push_back(nn::Add(last, residual));
  return outs;
}

Var AcousticModel::SpeakerLogits(Tape& tape, Var encoded) const {
  Var pooled = nn::MeanRows(encoded);
  if (config_.grl_reverse) pooled = nn::GradientReverse(pooled, config_.grl_lambda);
  return classifier_.Apply(tape, pooled);
}

std::vector<AcousticFrame> AcousticModel::Synthesize(std::span<const PhonemeRow> rows,
                                                     std::span<const int> durations,
                                                     int speaker) const {
  Tape tape;
  Var enc = Encode(tape, rows);
  auto outs = Decode(tape, LengthRegulate(enc, durations), speaker);
  const Tensor& y = outs.back().value();
  std::vector<AcousticFrame> frames(y.rows());
  for (int t = 0; t < y.rows(); ++t) {
    for (int d = 0; d < kFeatureDims; ++d) frames[t].v[d] = y(t, d);
  }
  return frames;
}

std::vector<double> AcousticModel::PooledEncoding(std::span<const PhonemeRow> rows) const {
  Tape tape;
  const Tensor& p = nn::MeanRows(Encode(tape, rows)).value();
  return {p.values().begin(), p.values().end()};
}

namespace {

nlohmann::ordered_json ConfigJson(const AcousticModelConfig& c) {
  return {{"ph_dim", c.ph_dim},
          {"pt_dim", c.pt_dim},
          {"pi_dim", c.pi_dim},
          {"sr_dim", c.sr_dim},
          {"dim", c.dim},
          {"heads", c.heads},
          {"encoder_blocks", c.encoder_blocks},
          {"decoder_blocks", c.decoder_blocks},
          {"kernel", c.kernel},
          {"filter", c.filter},
          {"speakers", c.speakers},
          {"grl_lambda", c.grl_lambda},
          {"grl_reverse", c.grl_reverse},
          {"pitch_weight", c.pitch_weight}};
}

}  // namespace

void AcousticModel::Save(const std::string& path) const {
  nlohmann::ordered_json manifest = {{"kind", "acoustic"},
                                     {"phoneme_vocab_version", kPhonemeVocabVersion},
                                     {"config", ConfigJson(config_)},
                                     {"metadata", nlohmann::ordered_json::parse(metadata_)}};
  nn::SaveCheckpoint(path, params_, manifest.dump());
}

AcousticModel AcousticModel::Load(const std::string& path) {
  nn::Checkpoint ckpt = nn::LoadCheckpoint(path);
  AcousticModelConfig c;
  std::string metadata = "{}";
  try {
    auto m = nlohmann::ordered_json::parse(ckpt.manifest_json);
    if (m.contains("metadata")) metadata = m["metadata"].dump();
    if (m.value("kind", "") != "acoustic") {
      throw Error(ErrorKind::kValidation, path + " is not an acoustic model checkpoint");
    }
    if (m.value("phoneme_vocab_version", -1) != kPhonemeVocabVersion) {
      throw Error(ErrorKind::kValidation, path + ": phoneme vocabulary version mismatch");
    }
    const auto& j = m.at("config");
    c.ph_dim = j.at("ph_dim");
    c.pt_dim = j.at("pt_dim");
    c.pi_dim = j.at("pi_dim");
    c.sr_dim = j.at("sr_dim");
    c.dim = j.at("dim");
    c.heads = j.at("heads");
    c.encoder_blocks = j.at("encoder_blocks");
    c.decoder_blocks = j.at("decoder_blocks");
    c.kernel = j.at("kernel");
    c.filter = j.at("filter");
    c.speakers = j.at("speakers");
    c.grl_lambda = j.at("grl_lambda");
    c.grl_reverse = j.value("grl_reverse", true);
    c.pitch_weight = j.at("pitch_weight");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path + ": bad checkpoint manifest: " + e.what());
  }
  AcousticModel model(c, 0);
  nn::ApplyCheckpoint(ckpt, model.params_);
  model.metadata_ = std::move(metadata);
  return model;
}

Var LengthRegulate(Var states, std::span<const int> durations) {
  if (static_cast<int>(durations.size()) != states.rows()) {
    throw Error(ErrorKind::kShape, "length_regulate: " + std::to_string(durations.size()) +
                                       " durations for " + std::to_string(states.rows()) +
                                       " states");
  }
  std::vector<int> ids;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (durations[i] < 0) {
      throw Error(ErrorKind::kValidation, "length_regulate: negative duration at row " +
                                              std::to_string(i));
    }
    ids.insert(ids.end(), durations[i], static_cast<int>(i));
  }
  if (ids.empty()) throw Error(ErrorKind::kValidation, "length_regulate: all durations are zero");
  return nn::GatherRows(states, ids);
}

std::vector<int> FitDurationsToFrames(std::vector<int> durations, int frames) {
  if (frames <= 0) throw Error(ErrorKind::kValidation, "fit durations: no frames");
  long long total = std::accumulate(durations.begin(), durations.end(), 0LL);
  if (durations.empty()) throw Error(ErrorKind::kValidation, "fit durations: no rows");
  if (total < frames) {
    durations.back() += static_cast<int>(frames - total);
    return durations;
  }
  for (int i = static_cast<int>(durations.size()) - 1; i >= 0 && total > frames; --i) {
    const long long take = std::min<long long>(durations[i], total - frames);
    durations[i] -= static_cast<int>(take);
    total -= take;
  }
  return durations;
}

Var ProgressiveLoss(std::span<const Var> projections, const Tensor& target,
                    std::span<const double> weights, bool progressive) {
  if (projections.empty()) throw Error(ErrorKind::kShape, "progressive loss: no projections");
  if (static_cast<int>(weights.size()) != target.cols()) {
    throw Error(ErrorKind::kShape, "progressive loss: " + std::to_string(weights.size()) +
                                       " weights for target " + target.ShapeString());
  }
  Tape& tape = *projections[0].tape;
  Var y = tape.Constant(target);
  Var w = tape.Constant(Tensor(1, target.cols(), std::vector<double>(weights.begin(),
                                                                     weights.end())));
  std::span<const Var> used = progressive ? projections : projections.last(1);
  std::optional<Var> sum;
  for (const Var& p : used) {
    if (!p.value().SameShape(target)) {
      throw Error(ErrorKind::kShape, "progressive loss: projection " + p.value().ShapeString() +
                                         " vs target " + target.ShapeString());
    }
    Var term = nn::Mean(nn::Mul(nn::Abs(nn::Sub(p, y)), w));
    sum = sum ? nn::Add(*sum, term) : term;
  }
  return nn::Scale(*sum, 1.0 / static_cast<double>(used.size()));
}

Var DatLoss(const AcousticModel& model, Tape& tape, Var encoded, int speaker) {
  if (speaker < 0 || speaker >= model.config().speakers) {
    throw Error(ErrorKind::kValidation, "dat loss: invalid speaker " + std::to_string(speaker));
  }
  if (model.config().speakers == 1) return tape.Constant(Tensor::Scalar(0.0));
  const int labels[] = {speaker};
  return nn::SoftmaxCrossEntropy(model.SpeakerLogits(tape, encoded), labels);
}

namespace {

Tensor TargetTensor(const AcousticExample& ex) {
  Tensor y(static_cast<int>(ex.target.size()), kFeatureDims);
  for (int t = 0; t < y.rows(); ++t) {
    for (int d = 0; d < kFeatureDims; ++d) y(t, d) = ex.target[t].v[d];
  }
  return y;
}

std::vector<int> TrainingDurations(const AcousticExample& ex) {
  std::vector<int> d;
  for (std::size_t i = 0; i < ex.utt.rows.size(); ++i) {
    const auto& g = ex.utt.rows[i].gt_dur;
    if (!g) {
      throw Error(ErrorKind::kValidation, "utterance " + ex.utt.id + " row " +
                                              std::to_string(i) +
                                              " has no ground-truth duration");
    }
    d.push_back(*g);
  }
  return FitDurationsToFrames(std::move(d), static_cast<int>(ex.target.size()));
}

}  // namespace

double AcousticValidationLoss(const AcousticModel& model,
                              std::span<const AcousticExample> data) {
  if (data.empty()) throw Error(ErrorKind::kValidation, "validation set is empty");
  const std::vector<double> ones(kFeatureDims, 1.0);
  double total = 0.0;
  for (const auto& ex : data) {
    Tape tape;
    auto outs = model.Decode(tape, LengthRegulate(model.Encode(tape, ex.utt.rows),
                                                  TrainingDurations(ex)),
                             ex.speaker);
    total += ProgressiveLoss(outs, TargetTensor(ex), ones, false).value().item();
  }
  return total / static_cast<double>(data.size());
}

std::string AcousticTrainReport::ToJson() const {
  nlohmann::ordered_json j;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"loss", e.loss},
                           {"recon_loss", e.recon_loss},
                           {"dat_loss", e.dat_loss}});
  }
  j["train_examples"] = train_examples;
  j["heldout_examples"] = heldout_examples;
  j["validation_loss"] =
      validation_loss ? nlohmann::ordered_json(*validation_loss) : nlohmann::ordered_json();
  return j.dump(2) + "\n";
}

AcousticTrainReport TrainAcoustic(AcousticModel& model, std::span<const AcousticExample> data,
                                  const AcousticTrainOptions& options) {
  if (data.empty()) throw Error(ErrorKind::kValidation, "acoustic corpus is empty");
  if (options.epochs < 0 || options.lr < 0.0) {
    throw Error(ErrorKind::kConfig, "epochs and lr must be non-negative");
  }
  bool dat = options.dat;
  if (options.recipe == AcousticRecipe::kFinetuneSingle) {
    if (options.init_checkpoint.empty()) {
      throw Error(ErrorKind::kConfig, "finetune recipe requires an initial checkpoint");
    }
    nn::ApplyCheckpoint(nn::LoadCheckpoint(options.init_checkpoint), model.params());
    for (const auto& ex : data) {
      if (ex.speaker != data[0].speaker) {
        throw Error(ErrorKind::kValidation, "finetune recipe expects a single singer");
      }
    }
    dat = false;
  }
  std::vector<Tensor> targets;
  std::vector<std::vector<int>> durations;
  for (const auto& ex : data) {
    targets.push_back(TargetTensor(ex));
    durations.push_back(TrainingDurations(ex));
  }

  nn::Rng rng(options.seed);
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.Shuffle(order);
  int n_hold = 0;
  if (options.holdout_fraction > 0.0 && data.size() >= 2) {
    n_hold = std::max(1, static_cast<int>(std::llround(options.holdout_fraction *
                                                       static_cast<double>(data.size()))));
    n_hold = std::min(n_hold, static_cast<int>(data.size()) - 1);
  }
  std::vector<int> held(order.begin(), order.begin() + n_hold);
  std::vector<int> train(order.begin() + n_hold, order.end());
  std::sort(held.begin(), held.end());
  std::sort(train.begin(), train.end());

  const auto weights = options.weighted ? FeatureWeights(model.config().pitch_weight)
                                        : std::vector<double>(kFeatureDims, 1.0);
  AcousticTrainReport report;
  report.train_examples = static_cast<int>(train.size());
  report.heldout_examples = n_hold;
  nn::Adam adam(options.lr);
  const double total_steps = static_cast<double>(options.epochs) * static_cast<double>(train.size());
  int step = 0;
  model.params().ZeroGrad();
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::vector<int> epoch_order = train;
    rng.Shuffle(epoch_order);
    AcousticEpoch stats;
    stats.epoch = epoch;
    for (int idx : epoch_order) {
      adam.set_lr(nn::CosineLr(options.lr, options.final_lr_fraction, step++, total_steps));
      const auto& ex = data[idx];
      Tape tape;
      Var enc = model.Encode(tape, ex.utt.rows);
      auto outs = model.Decode(tape, LengthRegulate(enc, durations[idx]), ex.speaker);
      Var recon = ProgressiveLoss(outs, targets[idx], weights, options.progressive);
      Var loss = recon;
      if (dat) {
        Var adv = DatLoss(model, tape, enc, ex.speaker);
        stats.dat_loss += adv.value().item();
        loss = nn::Add(recon, adv);
      }
      stats.recon_loss += recon.value().item();
      stats.loss += loss.value().item();
      tape.Backward(loss);
      if (options.clip_norm > 0.0) nn::ClipGradNorm(model.params(), options.clip_norm);
      adam.Step(model.params());
      model.params().ZeroGrad();
    }
    const double n = static_cast<double>(epoch_order.size());
    stats.loss /= n;
    stats.recon_loss /= n;
    stats.dat_loss /= n;
    report.epochs.push_back(stats);
  }
  if (n_hold > 0) {
    std::vector<AcousticExample> held_data;
    for (int i : held) held_data.push_back(data[i]);
    report.validation_loss = AcousticValidationLoss(model, held_data);
  }
  return report;
}

ProbeResult SpeakerProbe(const AcousticModel& model, std::span<const AcousticExample> train,
                         std::span<const AcousticExample> test, std::uint64_t seed,
                         int iterations) {
  if (train.empty()) throw Error(ErrorKind::kValidation, "speaker probe: no training clips");
  const int k = model.config().speakers;
  auto features = [&model](std::span<const AcousticExample> set) {
    std::vector<std::vector<double>> f;
    for (const auto& ex : set) f.push_back(model.PooledEncoding(ex.utt.rows));
    return f;
  };
  auto ftrain = features(train);
  auto ftest = features(test);
  const int dim = static_cast<int>(ftrain[0].size());
  std::vector<double> mean(dim, 0.0), scale(dim, 0.0);
  for (const auto& f : ftrain)
    for (int d = 0; d < dim; ++d) mean[d] += f[d] / ftrain.size();
  for (const auto& f : ftrain)
    for (int d = 0; d < dim; ++d) scale[d] += (f[d] - mean[d]) * (f[d] - mean[d]) / ftrain.size();
  for (double& s : scale) s = s > 1e-12 ? 1.0 / std::sqrt(s) : 0.0;
  auto matrix = [&](const std::vector<std::vector<double>>& f) {
    Tensor x(static_cast<int>(f.size()), dim);
    for (int i = 0; i < x.rows(); ++i)
      for (int d = 0; d < dim; ++d) x(i, d) = (f[i][d] - mean[d]) * scale[d];
    return x;
  };
  std::vector<int> ytrain, ytest;
  for (const auto& ex : train) ytrain.push_back(ex.speaker);
  for (const auto& ex : test) ytest.push_back(ex.speaker);

  nn::ParamSet ps;
  nn::Rng rng(seed);
  nn::Linear probe = nn::Linear::Create(ps, "probe", dim, k, rng);
  nn::Adam adam(0.05);
  const Tensor xtrain = matrix(ftrain);
  for (int it = 0; it < iterations; ++it) {
    Tape tape;
    Var loss = nn::SoftmaxCrossEntropy(probe.Apply(tape, tape.Constant(xtrain)), ytrain);
    tape.Backward(loss);
    adam.Step(ps);
    ps.ZeroGrad();
  }
  auto accuracy = [&](const Tensor& x, const std::vector<int>& y) {
    if (y.empty()) return 0.0;
    Tape tape;
    const Tensor& logits = probe.Apply(tape, tape.Constant(x)).value();
    int hit = 0;
    for (int i = 0; i < logits.rows(); ++i) {
      const double* r = logits.row(i);
      hit += static_cast<int>(std::max_element(r, r + k) - r) == y[i];
    }
    return static_cast<double>(hit) / y.size();
  };
  ProbeResult result;
  result.train_accuracy = accuracy(xtrain, ytrain);
  if (!ftest.empty()) result.test_accuracy = accuracy(matrix(ftest), ytest);
  return result;
}

}  // namespace warbler
