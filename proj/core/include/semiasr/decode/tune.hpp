// semiasr/decode/tune.hpp
//
// Two-pass decoding (fused beam search, n-best pruning, optional rescoring)
// and random search over the fusion and rescoring weights on a dev set.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "semiasr/decode/beam.hpp"

namespace semiasr::decode {

struct TrialWeights {
  double alpha = 0.0;
  double beta = 0.0;
  double alpha2 = 0.0;
  double beta2 = 0.0;
};

struct TwoPassConfig {
  FusionConfig fusion;
  /// Second pass; ignored when no rescoring LM is given.
  double alpha2 = 0.0;
  double beta2 = 0.0;
};

/// First pass, prune to `fusion.nbest`, then rescore with `lm2` when it is non-null.
/// `first_pass` receives the fusion config and returns the n-best list.
NBestList two_pass(const std::function<NBestList(const FusionConfig&)>& first_pass, const lm::LmScorer* lm2,
                   const TwoPassConfig& config);

struct TuneConfig {
  std::size_t trials = 128;
  double alpha_min = 0.0;
  double alpha_max = 5.0;
  double beta_min = -5.0;
  double beta_max = 5.0;
  std::uint64_t seed = 1;
  FusionConfig fusion;  ///< beam and n-best sizes; its alpha/beta are overwritten per trial

  void validate() const;
};

/// Draws alpha, beta, alpha2, beta2 (in that order) per trial, each uniform
/// over its range. Trial i is identical no matter how many trials follow it.
std::vector<TrialWeights> sample_trials(const TuneConfig& config, std::size_t count);

struct TrialResult {
  std::size_t trial = 0;  ///< 1-based
  TrialWeights weights;
  bool rescored = false;
  double dev_wer = 0.0;
};

struct TuneResult {
  TrialResult best;
  std::vector<TrialResult> table;

  TwoPassConfig decode_config(const FusionConfig& base) const;
};

/// Decoder for dev utterance `index` under a fusion config.
using FirstPassFn = std::function<NBestList(std::size_t index, const FusionConfig&)>;

/// Evaluates every sampled trial with two-pass decoding; the minimum dev WER
/// wins, ties going to the earliest trial.
TuneResult tune_random_search(const std::vector<std::string>& references, const FirstPassFn& first_pass,
                              const lm::LmScorer* lm2, const TuneConfig& config);

/// CTC convenience: `emissions[i]` are cached once and shared by all trials.
TuneResult tune_random_search(const std::vector<std::string>& references, const std::vector<nn::Tensor>& emissions,
                              const corpus::Vocabulary& vocab, const lm::LmScorer* lm, const lm::LmScorer* lm2,
                              const TuneConfig& config);

/// Columns: trial,alpha,beta,alpha2,beta2,dev_wer. alpha2/beta2 are empty when not rescored.
void write_tune_csv(const std::filesystem::path& path, const TuneResult& result);

}  // namespace semiasr::decode
