// lm/scorer.cpp
#include "semiasr/lm/scorer.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "semiasr/error.hpp"
#include "semiasr/lm/neural.hpp"
#include "semiasr/lm/ngram.hpp"

namespace semiasr::lm {

double lm_logprob(const LmScorer& lm, const std::vector<std::string>& words) {
  LmState state = lm.initial();
  double total = 0.0;
  for (const auto& w : words) {
    LmState next;
    total += lm.score(state, w, &next);
    state = std::move(next);
  }
  return total + lm.end_score(state);
}

double perplexity(const LmScorer& lm, const std::vector<std::vector<std::string>>& sentences) {
  if (sentences.empty()) throw Error("perplexity: empty corpus");
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : sentences) {
    total += lm_logprob(lm, s);
    n += s.size() + (lm.has_sentence_end() ? 1 : 0);
  }
  if (n == 0) throw Error("perplexity: corpus has no scored events");
  if (total == -std::numeric_limits<double>::infinity()) return std::numeric_limits<double>::infinity();
  return std::exp(-total / static_cast<double>(n));
}

UniformLm::UniformLm(std::size_t outcomes) : outcomes_(outcomes) {
  if (outcomes < 1) throw ConfigError("lm.outcomes", "must be >= 1");
}

double UniformLm::score(const LmState& state, const std::string&, LmState* next) const {
  if (next) *next = state;
  return -std::log(static_cast<double>(outcomes_));
}

double UniformLm::end_score(const LmState&) const { return -std::log(static_cast<double>(outcomes_)); }

std::unique_ptr<LmScorer> load_lm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string first;
  std::getline(in, first);
  if (first == "\\semiasr-ngram\\") return std::make_unique<NGramModel>(NGramModel::load(path));
  return std::make_unique<NeuralLm>(NeuralLm::load(path));
}

}  // namespace semiasr::lm
