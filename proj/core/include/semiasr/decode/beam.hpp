// semiasr/decode/beam.hpp
//
// CTC prefix beam search with word-level shallow fusion. A word is complete at
// a space token or at the utterance end; at that point the LM log-probability
// of the word is added, and the sentence-end probability is added once the
// utterance is finished. Hypotheses are ranked by
//
//   score = am + alpha * lm + beta * words
//
// where am is the CTC prefix log-probability (blank and non-blank paths merged).
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "semiasr/corpus/vocab.hpp"
#include "semiasr/lm/scorer.hpp"
#include "semiasr/nn/tensor.hpp"

namespace semiasr::decode {

struct FusionConfig {
  double alpha = 0.0;  ///< LM weight
  double beta = 0.0;   ///< word insertion penalty, added per word
  std::size_t beam = 50;
  std::size_t nbest = 50;
  /// No pruning at all: every prefix survives every frame. Only for tiny inputs.
  bool exhaustive = false;

  void validate() const;
};

struct Hypothesis {
  std::vector<int> tokens;  ///< vocabulary ids
  std::string text;         ///< words joined by single spaces
  double am = 0.0;
  double lm = 0.0;          ///< first-pass LM log-probability, sentence end included
  std::size_t words = 0;
  double score = 0.0;
  /// Second-pass LM log-probability; NaN until rescored.
  double lm2 = std::numeric_limits<double>::quiet_NaN();
};

struct NBestList {
  std::string id;
  double alpha = 0.0;
  double beta = 0.0;
  /// Rescoring weights; NaN when the list was not rescored.
  double alpha2 = std::numeric_limits<double>::quiet_NaN();
  double beta2 = std::numeric_limits<double>::quiet_NaN();
  std::vector<Hypothesis> hyps;  ///< best first

  const Hypothesis& best() const;
};

/// Strict ranking: higher score first, ties by token sequence in lexicographic order.
bool ranks_before(const Hypothesis& a, const Hypothesis& b);

/// `emissions` are [T, V+1] log-probabilities, column 0 blank, column i vocabulary id i-1.
/// `lm` may be null, which is the same as alpha = 0 with no LM state.
NBestList fused_beam_search(const nn::Tensor& emissions, const corpus::Vocabulary& vocab, const lm::LmScorer* lm,
                            const FusionConfig& config);

/// Top-k by score with the ranks_before tie-break; k >= |list| keeps everything.
NBestList nbest_prune(const NBestList& list, std::size_t k);

/// New score = am + alpha2 * strong-LM log-prob + beta2 * words; re-sorted.
/// The first-pass LM score stays in Hypothesis::lm.
NBestList rescore(const NBestList& list, const lm::LmScorer& strong, double alpha2, double beta2);

/// One JSON object per line: {"id","hyps":[{"text","am","lm","words","score"}]}.
void write_nbest_line(std::ostream& out, const NBestList& list);
std::vector<NBestList> read_nbest_file(const std::filesystem::path& path);

}  // namespace semiasr::decode
