// semiasr/selftrain/recognizer.hpp
//
// A trained acoustic model (CTC or seq2seq) bundled with the decoding used for
// tuning, evaluation and pseudo-labeling.
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semiasr/corpus/utterance.hpp"
#include "semiasr/ctc/model.hpp"
#include "semiasr/decode/tune.hpp"
#include "semiasr/eval/report.hpp"
#include "semiasr/lm/scorer.hpp"
#include "semiasr/seq2seq/model.hpp"

namespace semiasr::selftrain {

class Recognizer {
 public:
  virtual ~Recognizer() = default;
  /// Caches whatever per-utterance state decoding needs (emissions or features).
  virtual void prepare(const std::vector<const corpus::Utterance*>& utts, std::size_t threads) = 0;
  /// Tuning-mode first pass over prepared utterance i.
  virtual decode::NBestList tune_pass(std::size_t i, const decode::FusionConfig& f) = 0;
  /// Exact fused decode of prepared utterance i.
  virtual decode::NBestList first_pass(std::size_t i, const decode::FusionConfig& f) = 0;
  /// Decode of prepared utterance i without any LM (alpha = beta = 0).
  virtual std::string no_lm(std::size_t i) = 0;
  std::size_t prepared() const { return prepared_; }

 protected:
  std::size_t prepared_ = 0;
};

class CtcRecognizer final : public Recognizer {
 public:
  CtcRecognizer(std::shared_ptr<const ctc::CtcModel> model, const lm::LmScorer* lm);

  void prepare(const std::vector<const corpus::Utterance*>& utts, std::size_t threads) override;
  decode::NBestList tune_pass(std::size_t i, const decode::FusionConfig& f) override;
  decode::NBestList first_pass(std::size_t i, const decode::FusionConfig& f) override;
  /// Greedy best path.
  std::string no_lm(std::size_t i) override;

 private:
  std::shared_ptr<const ctc::CtcModel> model_;
  const lm::LmScorer* lm_;
  std::vector<nn::Tensor> emissions_;
};

/// Tuning re-ranks a cached alpha = beta = 0 n-best list instead of re-running
/// the autoregressive search for every trial.
class S2SRecognizer final : public Recognizer {
 public:
  S2SRecognizer(std::shared_ptr<const seq2seq::S2SModel> model, const lm::LmScorer* lm, std::size_t nbest);

  void prepare(const std::vector<const corpus::Utterance*>& utts, std::size_t threads) override;
  decode::NBestList tune_pass(std::size_t i, const decode::FusionConfig& f) override;
  decode::NBestList first_pass(std::size_t i, const decode::FusionConfig& f) override;
  /// Beam-1 search.
  std::string no_lm(std::size_t i) override;

 private:
  std::shared_ptr<const seq2seq::S2SModel> model_;
  const lm::LmScorer* lm_;
  std::size_t nbest_;
  std::vector<nn::Tensor> features_;
  std::vector<std::optional<decode::NBestList>> cached_;
};

/// Loads a CTC or seq2seq checkpoint, chosen by the `kind` of its sidecar.
std::unique_ptr<Recognizer> load_recognizer(const std::filesystem::path& checkpoint, const lm::LmScorer* lm,
                                            std::size_t nbest);

/// Reference transcripts; throws naming the first utterance without one.
std::vector<std::string> references_of(const std::vector<const corpus::Utterance*>& utts);

/// Random-search tuning of the fusion weights on `dev`.
decode::TuneResult tune_recognizer(Recognizer& rec, const std::vector<const corpus::Utterance*>& dev,
                                   const lm::LmScorer* lm2, const decode::TuneConfig& config, std::size_t threads);

/// Paired with-LM (two-pass, tuned weights) and no-LM decode of `utts`.
eval::PairedWer evaluate_recognizer(Recognizer& rec, const std::vector<const corpus::Utterance*>& utts,
                                    const lm::LmScorer* lm2, const decode::TwoPassConfig& config,
                                    std::size_t threads);

}  // namespace semiasr::selftrain
