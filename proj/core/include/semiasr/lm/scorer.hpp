// semiasr/lm/scorer.hpp
//
// Word-level language model interface shared by the n-gram, neural and uniform
// models. Scores are natural-log probabilities. Words outside the model
// vocabulary are scored as the unknown token.
#pragma once

#include <memory>
#include <string>
#include <vector>

namespace semiasr::lm {

inline constexpr const char* kUnk = "<unk>";
inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";

/// Scoring state: the word ids seen so far (models may truncate to their order).
struct LmState {
  std::vector<int> history;
  bool operator==(const LmState&) const = default;
};

class LmScorer {
 public:
  virtual ~LmScorer() = default;
  virtual std::string tag() const = 0;
  /// State at sentence start.
  virtual LmState initial() const { return {}; }
  /// log p(word | state); `next` (optional) receives the state after `word`.
  virtual double score(const LmState& state, const std::string& word, LmState* next = nullptr) const = 0;
  /// log p(</s> | state); 0 for models without a sentence-end event.
  virtual double end_score(const LmState& state) const = 0;
  /// Size of the predicted outcome set (vocabulary + unknown [+ sentence end]).
  virtual std::size_t outcome_count() const = 0;
  virtual bool has_sentence_end() const { return true; }
};

/// Sum of per-word conditionals plus the sentence end, scored incrementally.
double lm_logprob(const LmScorer& lm, const std::vector<std::string>& words);

/// exp(-(1/N) sum log p), N counting words plus sentence ends (when the model
/// predicts them). Returns +infinity when any event has probability zero.
double perplexity(const LmScorer& lm, const std::vector<std::vector<std::string>>& sentences);

/// Assigns 1/V to every one of V outcomes (V - 2 words, unknown, sentence end).
class UniformLm final : public LmScorer {
 public:
  explicit UniformLm(std::size_t outcomes);
  std::string tag() const override { return "uniform"; }
  double score(const LmState& state, const std::string& word, LmState* next) const override;
  double end_score(const LmState&) const override;
  std::size_t outcome_count() const override { return outcomes_; }

 private:
  std::size_t outcomes_;
};

/// Loads any model file written by this module (dispatch on the header line).
std::unique_ptr<LmScorer> load_lm(const std::string& path);

}  // namespace semiasr::lm
