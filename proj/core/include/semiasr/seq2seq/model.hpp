// semiasr/seq2seq/model.hpp
//
// Transformer encoder-decoder over log-Mel features with a word-piece output
// vocabulary. The frontend is a stack of temporal convolutions; the decoder
// predicts word pieces plus an end-of-sequence token.
//
// Token ids: word pieces 0..V-1, end-of-sequence V, start-of-sequence V+1
// (input side only).
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "semiasr/corpus/logmel.hpp"
#include "semiasr/corpus/utterance.hpp"
#include "semiasr/corpus/vocab.hpp"
#include "semiasr/decode/beam.hpp"
#include "semiasr/json_util.hpp"
#include "semiasr/lm/scorer.hpp"
#include "semiasr/nn/graph.hpp"
#include "semiasr/nn/layers.hpp"
#include "semiasr/nn/params.hpp"

namespace semiasr::seq2seq {

struct S2SConfig {
  corpus::LogMelConfig features;
  std::size_t frontend_layers = 4;
  std::size_t frontend_kernel = 3;
  /// Stride of each frontend layer; missing entries default to 1.
  std::vector<std::size_t> frontend_strides{2, 2, 1, 1};
  std::size_t encoder_blocks = 4;
  std::size_t decoder_blocks = 2;
  std::size_t dim = 128;
  std::size_t ffn_dim = 256;
  std::size_t heads = 4;
  double label_smoothing = 0.1;

  void validate() const;
  nn::TransformerBlockConfig block() const { return {dim, ffn_dim, heads}; }
  std::size_t stride(std::size_t layer) const { return layer < frontend_strides.size() ? frontend_strides[layer] : 1; }
};

Json to_json(const S2SConfig& config);
S2SConfig s2s_config_from_json(const Json& j, const std::string& path = "s2s");

class S2SModel {
 public:
  S2SModel(const S2SConfig& config, corpus::Vocabulary vocab, std::uint64_t seed);

  const S2SConfig& config() const { return config_; }
  const corpus::Vocabulary& vocab() const { return vocab_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  int eos_id() const { return static_cast<int>(vocab_.size()); }
  int bos_id() const { return static_cast<int>(vocab_.size()) + 1; }
  /// Output classes: word pieces + end-of-sequence.
  std::size_t outputs() const { return vocab_.size() + 1; }

  /// Per-utterance normalized log-Mel features [F, bins].
  nn::Tensor features(std::span<const float> samples) const;
  /// Encoder frames produced from `feature_frames` input frames (0 when too short).
  std::size_t encoder_frames(std::size_t feature_frames) const;
  /// Encoder memory [T', dim].
  nn::Var encode(nn::Graph& g, const nn::Tensor& features) const;
  /// Next-token log-probabilities [L, V+1] for decoder inputs (bos first).
  nn::Var decode(nn::Graph& g, nn::Var memory, const std::vector<int>& inputs) const;
  /// Teacher-forced, label-smoothed cross-entropy, mean over target tokens (eos included).
  nn::Var loss(nn::Graph& g, const nn::Tensor& features, const std::vector<int>& pieces,
               double label_smoothing) const;

  void save(const std::filesystem::path& path) const;
  static S2SModel load(const std::filesystem::path& path);

 private:
  S2SModel(const S2SConfig& config, corpus::Vocabulary vocab, nn::ParameterSet params);

  S2SConfig config_;
  corpus::Vocabulary vocab_;
  nn::ParameterSet params_;
};

/// Minimum of the label-smoothed cross-entropy over K classes, reached when the
/// model predicts the smoothed target distribution itself.
double smoothed_ce_floor(double epsilon, std::size_t classes);

struct S2SDecodeConfig {
  decode::FusionConfig fusion;  ///< alpha, beta, beam, nbest
  /// 0 means 2 * encoder frames + 10. Counts generated tokens, end-of-sequence included.
  std::size_t max_length = 0;
};

/// Beam search over word pieces. The fused ranking score is
/// am + alpha * lm + beta * words, with words completed at the separator or at
/// end-of-sequence. Beam 1 with alpha = beta = 0 is greedy decoding.
decode::NBestList s2s_beam_decode(const S2SModel& model, const nn::Tensor& features, const lm::LmScorer* lm,
                                  const S2SDecodeConfig& config);

struct S2STrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double learning_rate = 5e-4;
  double final_lr_scale = 0.1;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct S2SEpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  /// Teacher-forced dev loss; NaN without a dev set.
  double dev_loss = std::numeric_limits<double>::quiet_NaN();
};

/// Throws Error naming the first utterance whose transcript is missing or not
/// encodable with the model's word pieces.
std::vector<S2SEpochMetrics> s2s_train_run(S2SModel& model, const std::vector<const corpus::Utterance*>& train,
                                           const std::vector<const corpus::Utterance*>& dev,
                                           const S2STrainConfig& config,
                                           const std::function<void(const S2SEpochMetrics&)>& on_epoch = {});

}  // namespace semiasr::seq2seq
