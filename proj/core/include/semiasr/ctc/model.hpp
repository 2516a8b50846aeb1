// semiasr/ctc/model.hpp
//
// Acoustic model for CTC: the pre-trainable backbone (feature encoder + context
// network) with a linear head over blank + letters.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "semiasr/corpus/utterance.hpp"
#include "semiasr/corpus/vocab.hpp"
#include "semiasr/wav2vec/model.hpp"

namespace semiasr::ctc {

class CtcModel {
 public:
  /// Randomly initialized backbone and head.
  CtcModel(const wav2vec::Wav2VecConfig& config, corpus::Vocabulary vocab, std::uint64_t seed);
  /// Copies the backbone of `pretrained`; the head is freshly initialized from `head_seed`.
  static CtcModel from_pretrained(const wav2vec::Wav2VecModel& pretrained, corpus::Vocabulary vocab,
                                  std::uint64_t head_seed);

  const corpus::Vocabulary& vocab() const { return vocab_; }
  const wav2vec::Wav2VecModel& backbone() const { return backbone_; }
  nn::ParameterSet& params() { return backbone_.params(); }
  const nn::ParameterSet& params() const { return backbone_.params(); }
  /// Emission columns: blank + vocabulary.
  std::size_t columns() const { return vocab_.size() + 1; }

  /// [T, V+1] log-probabilities. `mask` rows are replaced by the mask embedding.
  nn::Var log_probs(nn::Graph& g, std::span<const float> samples, const std::vector<bool>* mask = nullptr) const;
  /// Inference emissions (no masking, no gradient tracking).
  nn::Tensor emissions(std::span<const float> samples) const;
  std::size_t frames(std::size_t samples) const;

  void save(const std::filesystem::path& path) const;
  static CtcModel load(const std::filesystem::path& path);

 private:
  CtcModel(wav2vec::Wav2VecModel backbone, corpus::Vocabulary vocab);
  static void add_head(nn::ParameterSet& params, std::size_t dim, std::size_t columns, std::uint64_t seed);

  wav2vec::Wav2VecModel backbone_;
  corpus::Vocabulary vocab_;
};

struct FinetuneConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double learning_rate = 5e-4;
  /// The rate decays linearly to learning_rate * final_lr_scale over the run.
  double final_lr_scale = 0.1;
  double clip_norm = 5.0;
  /// The feature encoder stays frozen for this many initial epochs.
  std::size_t freeze_encoder_epochs = 2;
  /// Span masking of the latents during training (the backbone's mask config, scaled).
  bool mask = true;
  double mask_prob_scale = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

struct FinetuneEpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  /// Greedy-decoding WER on the dev utterances; NaN when no dev set was given.
  double dev_wer = std::numeric_limits<double>::quiet_NaN();
};

using FinetuneCallback = std::function<void(const FinetuneEpochMetrics&)>;

/// Checks every transcript against the model vocabulary and every target against
/// the frame count. Throws Error naming the utterance on a vocabulary mismatch and
/// InfeasibleTargetError when a target cannot fit.
void validate_training_set(const CtcModel& model, const std::vector<const corpus::Utterance*>& utterances);

/// Optimizes the CTC loss over `train` (utterances with transcripts).
/// Deterministic given `config.seed`.
std::vector<FinetuneEpochMetrics> finetune_run(CtcModel& model, const std::vector<const corpus::Utterance*>& train,
                                               const std::vector<const corpus::Utterance*>& dev,
                                               const FinetuneConfig& config, const FinetuneCallback& on_epoch = {});

/// Greedy transcripts for a set of utterances.
std::vector<std::string> greedy_transcripts(const CtcModel& model, const std::vector<const corpus::Utterance*>& utts);

}  // namespace semiasr::ctc
