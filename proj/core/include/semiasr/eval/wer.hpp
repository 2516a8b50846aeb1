// semiasr/eval/wer.hpp
#pragma once

#include <string>
#include <vector>

namespace semiasr::eval {

struct WerBreakdown {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_words = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  double wer() const;
  WerBreakdown& operator+=(const WerBreakdown& other);
};

/// Word-level Levenshtein with unit costs. The traceback prefers substitution
/// (or match), then deletion, then insertion, so the S/D/I split is deterministic.
/// Throws on an empty reference.
WerBreakdown wer(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis);
WerBreakdown wer(const std::string& reference, const std::string& hypothesis);

/// Pooled over utterances: total errors / total reference words.
WerBreakdown corpus_wer(const std::vector<std::string>& references, const std::vector<std::string>& hypotheses);

}  // namespace semiasr::eval
