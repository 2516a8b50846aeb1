// semiasr/corpus/split.hpp
#pragma once

#include <cstdint>

#include "semiasr/corpus/utterance.hpp"

namespace semiasr::corpus {

struct SplitRequest {
  std::size_t labeled = 50;
  /// |unlabeled| = round(ratio * labeled)
  double ratio = 8.6;
  std::size_t dev = 30;
  std::size_t test = 30;
};

std::size_t unlabeled_count(const SplitRequest& request);
std::size_t required_count(const SplitRequest& request);

/// Reassigns splits over a pool of transcribed utterances (transcript or hidden
/// reference). Splits are disjoint, deterministic given `seed`, and unlabeled
/// utterances lose their transcript (kept as `reference`). Utterances beyond the
/// requested sizes are dropped.
Corpus split_corpus(const Corpus& pool, const SplitRequest& request, std::uint64_t seed);

}  // namespace semiasr::corpus
