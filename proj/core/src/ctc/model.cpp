// ctc/model.cpp
#include "semiasr/ctc/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "semiasr/corpus/vocab_json.hpp"
#include "semiasr/ctc/ctc.hpp"
#include "semiasr/error.hpp"
#include "semiasr/eval/wer.hpp"
#include "semiasr/nn/adam.hpp"
#include "semiasr/nn/checkpoint.hpp"
#include "semiasr/nn/layers.hpp"
#include "semiasr/util.hpp"
#include "semiasr/wav2vec/config_io.hpp"

namespace semiasr::ctc {

using nn::Graph;
using nn::Tensor;
using nn::Var;

CtcModel::CtcModel(const wav2vec::Wav2VecConfig& config, corpus::Vocabulary vocab, std::uint64_t seed)
    : backbone_(config, seed), vocab_(std::move(vocab)) {
  if (vocab_.size() == 0) throw Error("ctc model: empty vocabulary");
  add_head(backbone_.params(), config.context.dim, columns(), derive_seed(seed, "ctc-head"));
}

CtcModel::CtcModel(wav2vec::Wav2VecModel backbone, corpus::Vocabulary vocab)
    : backbone_(std::move(backbone)), vocab_(std::move(vocab)) {}

CtcModel CtcModel::from_pretrained(const wav2vec::Wav2VecModel& pretrained, corpus::Vocabulary vocab,
                                   std::uint64_t head_seed) {
  if (vocab.size() == 0) throw Error("ctc model: empty vocabulary");
  CtcModel m(pretrained, std::move(vocab));
  m.params().remove_prefix("ctc_head.");
  add_head(m.params(), pretrained.config().context.dim, m.columns(), head_seed);
  return m;
}

void CtcModel::add_head(nn::ParameterSet& params, std::size_t dim, std::size_t columns, std::uint64_t seed) {
  nn::ParameterSet head(seed);
  nn::init_linear(head, "ctc_head", dim, columns);
  for (auto& [name, p] : head.entries()) params.add(name, p.value);
}

Var CtcModel::log_probs(Graph& g, std::span<const float> samples, const std::vector<bool>* mask) const {
  Var z = backbone_.encode_features(g, samples);
  Var c = backbone_.contextualize(g, z, mask);
  return nn::log_softmax_rows(nn::linear(g, c, "ctc_head"));
}

Tensor CtcModel::emissions(std::span<const float> samples) const {
  Graph g(const_cast<nn::ParameterSet*>(&params()));
  return log_probs(g, samples).value();
}

std::size_t CtcModel::frames(std::size_t samples) const {
  return wav2vec::encoder_output_length(samples, backbone_.config().encoder);
}

void CtcModel::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(path, params());
  write_json_file(sidecar_path(path), {{"kind", "ctc"},
                                       {"wav2vec", wav2vec::to_json(backbone_.config())},
                                       {"vocab", corpus::to_json(vocab_)}});
}

CtcModel CtcModel::load(const std::filesystem::path& path) {
  const Json meta = read_json_file(sidecar_path(path));
  if (meta.value("kind", "") != "ctc") throw IoError(path.string() + ": not a CTC model checkpoint");
  auto config = wav2vec::wav2vec_config_from_json(meta.at("wav2vec"));
  auto vocab = corpus::vocabulary_from_json(meta.at("vocab"));
  nn::ParameterSet params = nn::load_checkpoint(path);
  for (const char* name : {"ctc_head.w", "ctc_head.b"}) {
    if (!params.contains(name)) throw IoError(path.string() + ": missing parameter " + name);
  }
  if (params.at("ctc_head.w").value.cols() != vocab.size() + 1) {
    throw ShapeError(path.string() + ": head has " + std::to_string(params.at("ctc_head.w").value.cols()) +
                     " outputs, vocabulary needs " + std::to_string(vocab.size() + 1));
  }
  return CtcModel(wav2vec::Wav2VecModel(std::move(config), std::move(params)), std::move(vocab));
}

void FinetuneConfig::validate() const {
  if (batch_size < 1) throw ConfigError("finetune.batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("finetune.learning_rate", "must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("finetune.clip_norm", "must be positive");
  if (final_lr_scale < 0.0 || final_lr_scale > 1.0) throw ConfigError("finetune.final_lr_scale", "must be in [0, 1]");
  if (mask_prob_scale < 0.0) throw ConfigError("finetune.mask_prob_scale", "must be >= 0");
}

namespace {

std::vector<int> target_of(const CtcModel& model, const corpus::Utterance& u) {
  if (!u.transcript) throw Error("utterance " + u.id + " has no transcript");
  try {
    return to_columns(model.vocab().encode(*u.transcript));
  } catch (const Error& e) {
    throw Error("vocabulary mismatch between model head and corpus at utterance " + u.id + ": " + e.what());
  }
}

}  // namespace

void validate_training_set(const CtcModel& model, const std::vector<const corpus::Utterance*>& utterances) {
  for (const corpus::Utterance* u : utterances) {
    const auto target = target_of(model, *u);
    const std::size_t frames = model.frames(u->samples.size());
    if (frames < required_frames(target) || frames == 0) {
      throw InfeasibleTargetError(frames, std::max<std::size_t>(required_frames(target), 1));
    }
  }
}

std::vector<std::string> greedy_transcripts(const CtcModel& model, const std::vector<const corpus::Utterance*>& utts) {
  std::vector<std::string> out;
  out.reserve(utts.size());
  for (const corpus::Utterance* u : utts) out.push_back(normalize_spaces(ctc_greedy_text(model.emissions(u->samples), model.vocab())));
  return out;
}

std::vector<FinetuneEpochMetrics> finetune_run(CtcModel& model, const std::vector<const corpus::Utterance*>& train,
                                               const std::vector<const corpus::Utterance*>& dev,
                                               const FinetuneConfig& config, const FinetuneCallback& on_epoch) {
  config.validate();
  if (train.empty() && config.epochs > 0) throw Error("finetune: empty labeled set");
  validate_training_set(model, train);
  std::vector<std::vector<int>> targets;
  for (const corpus::Utterance* u : train) targets.push_back(target_of(model, *u));
  std::vector<std::string> dev_refs;
  for (const corpus::Utterance* u : dev) {
    if (!u->transcript) throw Error("finetune: dev utterance " + u->id + " has no transcript");
    dev_refs.push_back(*u->transcript);
  }

  auto& params = model.params();
  params.set_frozen("quant.", true);
  params.set_frozen("final_proj.", true);
  wav2vec::MaskConfig mask_cfg = model.backbone().config().mask;
  mask_cfg.start_prob *= config.mask_prob_scale;

  nn::OptimizerState opt({config.learning_rate});
  std::mt19937_64 order_rng(derive_seed(config.seed, "finetune-order"));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t steps_per_epoch = (train.size() + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(std::max<std::size_t>(1, steps_per_epoch * config.epochs));
  std::vector<FinetuneEpochMetrics> history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const bool frozen = epoch < config.freeze_encoder_epochs;
    params.set_frozen("enc.", frozen);
    params.set_frozen("feat_ln.", frozen);
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Graph g(&params);
      std::vector<Var> losses;
      for (std::size_t i = start; i < end; ++i) {
        const corpus::Utterance& u = *train[order[i]];
        std::vector<bool> covered;
        if (config.mask && mask_cfg.start_prob > 0.0) {
          std::mt19937_64 rng(derive_seed(config.seed, u.id + "#" + std::to_string(epoch)));
          covered = wav2vec::sample_masks(model.frames(u.samples.size()), mask_cfg, rng).covered;
        }
        Var lp = model.log_probs(g, u.samples, covered.empty() ? nullptr : &covered);
        losses.push_back(ctc_loss(lp, targets[order[i]]));
      }
      Var loss = nn::mean(nn::concat_rows(losses));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NonFiniteError("finetune", "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                             std::to_string(opt.step + 1));
      }
      params.zero_grad();
      g.backward(loss);
      nn::clip_grad_norm(params, config.clip_norm);
      const double progress = static_cast<double>(opt.step) / total_steps;
      opt.config.learning_rate = config.learning_rate * (1.0 - (1.0 - config.final_lr_scale) * progress);
      nn::adam_step(params, opt);
      loss_sum += value;
      ++batches;
    }
    FinetuneEpochMetrics m;
    m.epoch = epoch;
    m.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    if (!dev.empty()) m.dev_wer = eval::corpus_wer(dev_refs, greedy_transcripts(model, dev)).wer();
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  params.set_frozen("enc.", false);
  params.set_frozen("feat_ln.", false);
  return history;
}

}  // namespace semiasr::ctc
