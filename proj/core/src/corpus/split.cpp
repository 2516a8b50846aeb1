// corpus/split.cpp
#include "semiasr/corpus/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "semiasr/error.hpp"

namespace semiasr::corpus {

std::size_t unlabeled_count(const SplitRequest& r) {
  if (r.ratio < 0.0) throw ConfigError("split.ratio", "must be non-negative");
  return static_cast<std::size_t>(std::llround(r.ratio * static_cast<double>(r.labeled)));
}

std::size_t required_count(const SplitRequest& r) { return r.labeled + unlabeled_count(r) + r.dev + r.test; }

Corpus split_corpus(const Corpus& pool, const SplitRequest& request, std::uint64_t seed) {
  const std::size_t need = required_count(request);
  if (pool.size() < need) {
    throw Error("split_corpus: need " + std::to_string(need) + " utterances, corpus has " +
                std::to_string(pool.size()));
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t sizes[] = {request.labeled, unlabeled_count(request), request.dev, request.test};
  const Split kinds[] = {Split::kLabeled, Split::kUnlabeled, Split::kDev, Split::kTest};
  Corpus out;
  std::size_t next = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      Utterance u = pool.utterances[order[next++]];
      std::optional<std::string> text = u.transcript ? u.transcript : u.reference;
      if (!text) throw Error("split_corpus: utterance " + u.id + " has no transcript or reference");
      u.split = kinds[k];
      u.origin = Origin::kGold;
      if (u.split == Split::kUnlabeled) {
        u.transcript.reset();
        u.reference = text;
      } else {
        u.transcript = text;
        u.reference.reset();
      }
      out.utterances.push_back(std::move(u));
    }
  }
  return out;
}

}  // namespace semiasr::corpus
