// semiasr/pretrain/pretrain.hpp
//
// Contrastive pre-training: for each masked step t the projected context c_t
// must pick its quantized latent q_t out of {q_t} plus K distractors drawn from
// other masked steps of the same utterance,
//
//   L_t = -log( exp(sim(c_t, q_t)/k) / sum_{q in {q_t} + Q_t} exp(sim(c_t, q)/k) ),
//
// with cosine similarity sim and temperature k (1 by default), plus a codebook
// diversity penalty weighted by lambda.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "semiasr/corpus/utterance.hpp"
#include "semiasr/nn/graph.hpp"
#include "semiasr/wav2vec/model.hpp"

namespace semiasr::pretrain {

struct PretrainConfig {
  std::size_t distractors = 20;
  double diversity_weight = 0.1;
  double similarity_temperature = 1.0;
  std::size_t epochs = 5;
  std::size_t batch_size = 8;
  double learning_rate = 5e-4;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// K time indices drawn uniformly from the masked positions other than t:
/// without replacement when at least K candidates exist, with replacement otherwise.
/// Throws when t is not masked, or when K > 0 and there is no other masked position.
std::vector<std::size_t> sample_distractors(const wav2vec::MaskSet& mask, std::size_t t, std::size_t k,
                                            std::mt19937_64& rng);

struct ContrastiveTerms {
  nn::Var per_position;  ///< [M, 1] loss of every masked position
  /// Fraction of positions whose true target has the highest similarity; ties
  /// among the maximum count as 1/(number tied).
  double accuracy = 0.0;
};

/// `context` and `targets` are [M, D] rows of the masked positions; `distractors[i]`
/// holds row indices into `targets` for position i.
ContrastiveTerms contrastive_loss(nn::Var context, nn::Var targets,
                                  const std::vector<std::vector<std::size_t>>& distractors,
                                  double temperature = 1.0);

/// Scalar reference of the contrastive term for a single position.
double contrastive_loss_value(std::span<const double> context, std::span<const double> target,
                              const std::vector<std::vector<double>>& distractors, double temperature = 1.0);

/// (1/G) * sum_g (1 - H(p_g) / ln V). Throws when a distribution is not normalized (|sum - 1| > 1e-6).
double diversity_penalty(const std::vector<std::vector<double>>& distributions);
/// Differentiable form over [1, V] batch-averaged distributions.
nn::Var diversity_penalty(const std::vector<nn::Var>& distributions);

struct PretrainEpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double contrastive_accuracy = 0.0;
  double diversity = 0.0;
};

struct PretrainResult {
  std::vector<PretrainEpochMetrics> epochs;
};

using EpochCallback = std::function<void(const PretrainEpochMetrics&)>;

/// Adam on contrastive + lambda * diversity over `utterances` (batches of
/// `batch_size`, shuffled per epoch). Deterministic given `config.seed`.
/// Throws NonFiniteError naming epoch and step on a non-finite loss.
PretrainResult pretrain_run(const std::vector<const corpus::Utterance*>& utterances, wav2vec::Wav2VecModel& model,
                            const PretrainConfig& config, const EpochCallback& on_epoch = {});

/// Evaluates loss terms and contrastive accuracy without updating the model.
PretrainEpochMetrics evaluate_contrastive(const std::vector<const corpus::Utterance*>& utterances,
                                          const wav2vec::Wav2VecModel& model, const PretrainConfig& config,
                                          std::uint64_t seed, std::size_t epoch = 0);

}  // namespace semiasr::pretrain
