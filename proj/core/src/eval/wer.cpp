// eval/wer.cpp
#include "semiasr/eval/wer.hpp"

#include <algorithm>

#include "semiasr/error.hpp"
#include "semiasr/util.hpp"

namespace semiasr::eval {

double WerBreakdown::wer() const {
  if (reference_words == 0) throw Error("wer: empty reference");
  return static_cast<double>(errors()) / static_cast<double>(reference_words);
}

WerBreakdown& WerBreakdown::operator+=(const WerBreakdown& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  reference_words += o.reference_words;
  return *this;
}

WerBreakdown wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) throw Error("wer: empty reference (WER undefined)");
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), at(i - 1, j) + 1, at(i, j - 1) + 1});

  WerBreakdown out;
  out.reference_words = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++out.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  return out;
}

WerBreakdown wer(const std::string& reference, const std::string& hypothesis) {
  return wer(split_words(reference), split_words(hypothesis));
}

WerBreakdown corpus_wer(const std::vector<std::string>& references, const std::vector<std::string>& hypotheses) {
  if (references.size() != hypotheses.size()) {
    throw Error("corpus_wer: " + std::to_string(references.size()) + " references vs " +
                std::to_string(hypotheses.size()) + " hypotheses");
  }
  if (references.empty()) throw Error("corpus_wer: no utterances");
  WerBreakdown total;
  for (std::size_t i = 0; i < references.size(); ++i) total += wer(references[i], hypotheses[i]);
  return total;
}

}  // namespace semiasr::eval
