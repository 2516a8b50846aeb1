// tests/unit/test_lm.cpp
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "semiasr/corpus/synth.hpp"
#include "semiasr/error.hpp"
#include "semiasr/lm/neural.hpp"
#include "semiasr/lm/ngram.hpp"
#include "semiasr/lm/scorer.hpp"
#include "semiasr/util.hpp"
#include "test_util.hpp"

namespace semiasr::lm {
namespace {

using Sentences = std::vector<std::vector<std::string>>;

NGramConfig cfg(std::size_t order, Smoothing s, bool sentence_end = true) {
  NGramConfig c;
  c.order = order;
  c.smoothing = s;
  c.sentence_end = sentence_end;
  return c;
}

Sentences grammar_sentences(std::uint64_t seed, std::size_t n) {
  const auto g = corpus::make_grammar({}, 1);
  Sentences out;
  for (const auto& t : corpus::generate_text(g, seed, n)) out.push_back(split_words(t));
  return out;
}

TEST(NGram, MleDeterministicBigram) {
  const Sentences s(10, {"a", "b"});
  const auto m = NGramModel::train(s, cfg(2, Smoothing::kMle));
  EXPECT_DOUBLE_EQ(m.log_prob({m.word_id("a")}, m.word_id("b")), 0.0);
  EXPECT_DOUBLE_EQ(lm_logprob(m, {"a", "b"}), 0.0);
}

TEST(NGram, AddOneHandCount) {
  const Sentences s{{"a", "b"}, {"a", "c"}};
  const auto m = NGramModel::train(s, cfg(2, Smoothing::kAddK, false));
  EXPECT_EQ(m.outcome_count(), 4u);
  EXPECT_NEAR(std::exp(m.log_prob({m.word_id("a")}, m.word_id("b"))), 1.0 / 3.0, 1e-15);
  // p(a|<s>) = (2+1)/(2+4); p(b|a) = p(c|a) = 1/3; N = 4
  const double expect = std::exp(-(2 * std::log(0.5) + 2 * std::log(1.0 / 3.0)) / 4.0);
  EXPECT_NEAR(perplexity(m, s), expect, 1e-12);
  EXPECT_NEAR(perplexity(m, s), std::sqrt(6.0), 1e-12);
}

TEST(NGram, AddOneWithSentenceEndGrowsDenominator) {
  const Sentences s{{"a", "b"}, {"a", "c"}};
  const auto m = NGramModel::train(s, cfg(2, Smoothing::kAddK, true));
  EXPECT_NEAR(std::exp(m.log_prob({m.word_id("a")}, m.word_id("b"))), 2.0 / 7.0, 1e-15);
}

TEST(NGram, EveryContextIsNormalized) {
  const Sentences s = grammar_sentences(3, 400);
  std::mt19937_64 rng(4);
  for (auto sm : {Smoothing::kMle, Smoothing::kAddK, Smoothing::kStupidBackoff}) {
    for (std::size_t order : {1u, 2u, 3u}) {
      const auto m = NGramModel::train(s, cfg(order, sm));
      const auto outs = m.outcomes();
      for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> ctx;
        for (std::size_t k = 0; k + 1 < order; ++k) {
          // mix of seen words, unknown and sentence start
          const int r = std::uniform_int_distribution<int>(0, static_cast<int>(m.vocabulary().size()) + 1)(rng);
          ctx.push_back(r == static_cast<int>(m.vocabulary().size()) + 1 ? m.bos_id() : r);
        }
        double total = 0.0;
        for (int o : outs) total += std::exp(m.log_prob(ctx, o));
        EXPECT_NEAR(total, 1.0, 1e-9) << to_string(sm) << " order " << order;
      }
    }
  }
}

TEST(NGram, IncrementalEqualsWholeSequence) {
  const Sentences train = grammar_sentences(3, 300);
  const auto m = NGramModel::train(train, cfg(3, Smoothing::kStupidBackoff));
  const Sentences test = grammar_sentences(9, 100);
  for (auto s : test) {
    s.push_back("zzz");  // unknown word
    double whole = 0.0;
    std::vector<int> ids(2, m.bos_id());
    for (const auto& w : s) {
      const int id = m.word_id(w) < 0 ? m.unk_id() : m.word_id(w);
      whole += m.log_prob(ids, id);
      ids.push_back(id);
    }
    whole += m.log_prob(ids, m.eos_id());
    EXPECT_NEAR(lm_logprob(m, s), whole, 1e-12);
  }
}

TEST(NGram, EmptySentenceIsEndGivenStart) {
  const auto m = NGramModel::train(grammar_sentences(3, 50), cfg(2, Smoothing::kAddK));
  EXPECT_DOUBLE_EQ(lm_logprob(m, {}), m.log_prob({m.bos_id()}, m.eos_id()));
  EXPECT_DOUBLE_EQ(lm_logprob(m, {}), m.end_score(m.initial()));
}

TEST(NGram, ZeroProbabilityGivesInfinitePerplexity) {
  const auto m = NGramModel::train({{"a", "b"}}, cfg(2, Smoothing::kMle));
  EXPECT_TRUE(std::isinf(perplexity(m, {{"b", "a"}})));
}

TEST(NGram, Errors) {
  EXPECT_THROW(NGramModel::train({{"a"}}, cfg(0, Smoothing::kMle)), ConfigError);
  EXPECT_THROW(NGramModel::train({}, cfg(2, Smoothing::kMle)), Error);
}

TEST(NGram, FileRoundTripAndDispatch) {
  const auto dir = semiasr::testing::temp_dir("ngram");
  const auto m = NGramModel::train(grammar_sentences(3, 200), cfg(3, Smoothing::kStupidBackoff));
  m.save(dir / "lm.txt");
  const auto r = NGramModel::load(dir / "lm.txt");
  const auto any = load_lm((dir / "lm.txt").string());
  EXPECT_EQ(any->tag(), "ngram");
  for (const auto& s : grammar_sentences(5, 30)) {
    EXPECT_NEAR(lm_logprob(r, s), lm_logprob(m, s), 1e-12);
    EXPECT_NEAR(lm_logprob(*any, s), lm_logprob(m, s), 1e-12);
  }
  std::ifstream in(dir / "lm.txt");
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "\\semiasr-ngram\\");
}

TEST(Uniform, PerplexityIsVocabularySize) {
  for (std::size_t v : {2u, 7u, 52u}) {
    const UniformLm u(v);
    EXPECT_NEAR(perplexity(u, grammar_sentences(2, 50)), static_cast<double>(v), 1e-12 * v);
  }
}

NeuralLmConfig tiny_neural(std::size_t epochs) {
  NeuralLmConfig c;
  c.blocks = 1;
  c.dim = 32;
  c.ffn_dim = 64;
  c.heads = 2;
  c.epochs = epochs;
  c.learning_rate = 3e-3;
  return c;
}

TEST(Neural, UntrainedPerplexityNearVocabularySize) {
  const Sentences s = grammar_sentences(3, 100);
  const auto m = NeuralLm::train(s, tiny_neural(0));
  const double v = static_cast<double>(m.outcome_count());
  const double ppl = perplexity(m, grammar_sentences(4, 50));
  EXPECT_GT(ppl, 0.7 * v);
  EXPECT_LT(ppl, 1.3 * v);
}

TEST(Neural, OutputsAreLogDistributions) {
  const auto m = NeuralLm::train(grammar_sentences(3, 50), tiny_neural(1));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> hist(static_cast<std::size_t>(trial % 5));
    for (int& h : hist) h = std::uniform_int_distribution<int>(0, m.unk_id())(rng);
    double s = 0.0;
    for (double lp : m.next_log_probs(hist)) s += std::exp(lp);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Neural, IncrementalEqualsWholeSequence) {
  auto m = NeuralLm::train(grammar_sentences(3, 80), tiny_neural(1));
  for (const auto& s : grammar_sentences(8, 100)) {
    std::vector<int> input{m.bos_id()};
    std::vector<int> target;
    for (const auto& w : s) {
      const int id = m.word_id(w) < 0 ? m.unk_id() : m.word_id(w);
      input.push_back(id);
      target.push_back(id);
    }
    target.push_back(m.eos_id());
    nn::Graph g(&m.params());
    const nn::Tensor lp = m.forward(g, input).value();
    double whole = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) whole += lp(i, static_cast<std::size_t>(target[i]));
    EXPECT_NEAR(lm_logprob(m, s), whole, 1e-9);
  }
}

TEST(Neural, CausalPositionsIgnoreFutureTokens) {
  auto m = NeuralLm::train(grammar_sentences(3, 50), tiny_neural(1));
  nn::Graph g(&m.params());
  const nn::Tensor a = m.forward(g, {m.bos_id(), 0, 1, 2}).value();
  const nn::Tensor b = m.forward(g, {m.bos_id(), 0, 5, 7}).value();
  for (std::size_t c = 0; c < a.cols(); ++c) {
    EXPECT_NEAR(a(0, c), b(0, c), 1e-12);
    EXPECT_NEAR(a(1, c), b(1, c), 1e-12);
  }
}

TEST(Neural, OverfitsSingleSentence) {
  const Sentences s(8, {"abc", "de", "fgh"});
  auto c = tiny_neural(60);
  double last = 1e9;
  auto m = NeuralLm::train(s, c, [&](std::size_t, double loss) { last = loss; });
  EXPECT_LT(last, 0.1);
  nn::Graph g(&m.params());
  EXPECT_LT(m.sentence_loss(g, s[0]).value().item(), 0.1);
}

TEST(Neural, PerplexityOrderingOnBigramCorpus) {
  const Sentences train = grammar_sentences(3, 1500);
  const Sentences dev = grammar_sentences(11, 200);
  auto c = tiny_neural(6);
  const auto neural = NeuralLm::train(train, c);
  const auto ngram = NGramModel::train(train, cfg(3, Smoothing::kStupidBackoff));
  const UniformLm uniform(ngram.outcome_count());
  const double pn = perplexity(neural, dev), pg = perplexity(ngram, dev), pu = perplexity(uniform, dev);
  EXPECT_LT(pn, pg);
  EXPECT_LT(pg, pu);
}

TEST(Neural, SaveLoadAndDispatch) {
  const auto dir = semiasr::testing::temp_dir("neural");
  const auto m = NeuralLm::train(grammar_sentences(3, 50), tiny_neural(1));
  m.save(dir / "nlm.ckpt");
  const auto r = NeuralLm::load(dir / "nlm.ckpt");
  const auto any = load_lm((dir / "nlm.ckpt").string());
  EXPECT_EQ(any->tag(), "neural");
  for (const auto& s : grammar_sentences(5, 10)) {
    EXPECT_EQ(lm_logprob(r, s), lm_logprob(m, s));
    EXPECT_EQ(lm_logprob(*any, s), lm_logprob(m, s));
  }
}

TEST(Neural, TrainingIsDeterministic) {
  const Sentences s = grammar_sentences(3, 60);
  const auto a = NeuralLm::train(s, tiny_neural(1));
  const auto b = NeuralLm::train(s, tiny_neural(1));
  for (const auto& t : grammar_sentences(4, 10)) EXPECT_EQ(lm_logprob(a, t), lm_logprob(b, t));
}

}  // namespace
}  // namespace semiasr::lm
