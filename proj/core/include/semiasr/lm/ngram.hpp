// semiasr/lm/ngram.hpp
//
// Count-based word n-gram model. Every sentence is padded with n-1 "<s>" on the
// left; "</s>" is a predicted outcome when `sentence_end` is set. The outcome
// set O is the training vocabulary plus "<unk>" (plus "</s>").
//
//   mle             c(h w) / c(h), full context only
//   add-k           (c(h w) + k) / (c(h) + k |O|)
//   stupid-backoff  S(w|h) = c(h w) / c(h) if c(h w) > 0, else b * S(w|h');
//                   unigram level is add-k; p(w|h) = S(w|h) / sum_o S(o|h)
//
// Under mle and stupid-backoff a context never seen in training takes the
// distribution of its longest seen suffix; add-k applies its formula as is
// (uniform for unseen contexts). Every context is therefore normalized.
//
// File grammar (text, '\t' separated):
//   \semiasr-ngram\   (first line)
//   order <n>
//   smoothing <mle|add-k|stupid-backoff>
//   k <double>
//   backoff <double>
//   sentence_end <0|1>
//   vocab <count>
//   <one word per line, sorted>
//   \<m>-grams:            for m = 1..n
//   <log10 p(w|h)>\t<h... w>\t<count>   sorted by token sequence
//   \end\   (last line)
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "semiasr/lm/scorer.hpp"

namespace semiasr::lm {

enum class Smoothing { kMle, kAddK, kStupidBackoff };

std::string to_string(Smoothing s);
Smoothing parse_smoothing(const std::string& s);

struct NGramConfig {
  std::size_t order = 3;
  Smoothing smoothing = Smoothing::kStupidBackoff;
  double k = 1.0;          ///< add-k constant (also the unigram level of stupid backoff)
  double backoff = 0.4;    ///< stupid-backoff multiplier
  bool sentence_end = true;

  void validate() const;
};

class NGramModel final : public LmScorer {
 public:
  /// Sentences are word lists. Throws ConfigError for order < 1 and Error for an empty corpus.
  static NGramModel train(const std::vector<std::vector<std::string>>& sentences, const NGramConfig& config);
  static NGramModel train_text(const std::vector<std::string>& transcripts, const NGramConfig& config);

  std::string tag() const override { return "ngram"; }
  LmState initial() const override;
  double score(const LmState& state, const std::string& word, LmState* next) const override;
  double end_score(const LmState& state) const override;
  std::size_t outcome_count() const override { return words_.size() + (config_.sentence_end ? 2 : 1); }
  bool has_sentence_end() const override { return config_.sentence_end; }

  const NGramConfig& config() const { return config_; }
  const std::vector<std::string>& vocabulary() const { return words_; }
  /// Outcome ids: 0..V-1 words, V unknown, V+1 sentence end; V+2 is "<s>" (context only).
  int word_id(const std::string& word) const;
  int unk_id() const { return static_cast<int>(words_.size()); }
  int eos_id() const { return static_cast<int>(words_.size()) + 1; }
  int bos_id() const { return static_cast<int>(words_.size()) + 2; }
  /// log p(outcome | context ids), context of any length (truncated to order - 1).
  double log_prob(const std::vector<int>& context, int outcome) const;
  /// Number of outcomes in the predicted set, as ids.
  std::vector<int> outcomes() const;

  void save(const std::filesystem::path& path) const;
  static NGramModel load(const std::filesystem::path& path);

 private:
  using Key = std::vector<int>;
  struct ContextStats {
    double total = 0.0;                 ///< c(h): occurrences of h followed by a predicted outcome
    std::map<int, double> successors;   ///< c(h w)
  };

  void finalize();
  const ContextStats* find(const Key& context) const;
  /// p(outcome | h) at exactly the context h (seen, or empty).
  double prob_at(const Key& h, int outcome) const;
  double raw_score(const Key& h, int outcome) const;  ///< unnormalized S for stupid backoff
  std::string token(int id) const;

  NGramConfig config_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
  std::map<Key, ContextStats> contexts_;  ///< keyed by context ids (length 0..n-1)
  std::map<Key, double> raw_totals_;
};

}  // namespace semiasr::lm
