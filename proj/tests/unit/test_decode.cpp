// tests/unit/test_decode.cpp
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "semiasr/decode/beam.hpp"
#include "semiasr/decode/tune.hpp"
#include "semiasr/error.hpp"
#include "semiasr/eval/wer.hpp"
#include "semiasr/lm/ngram.hpp"
#include "semiasr/util.hpp"
#include "test_util.hpp"

namespace semiasr::decode {
namespace {

using nn::Tensor;
using semiasr::testing::log_add;
using semiasr::testing::random_log_probs;

const corpus::Vocabulary& letters() {
  static const auto v = corpus::Vocabulary::letters("ab ");
  return v;
}

const lm::NGramModel& word_lm() {
  static const auto m = [] {
    lm::NGramConfig c;
    c.order = 2;
    return lm::NGramModel::train({{"a", "ab"}, {"ab", "b"}, {"ba"}, {"a", "a", "b"}, {"aa", "ab"}}, c);
  }();
  return m;
}

struct Scored {
  std::vector<int> tokens;
  double am, lm, score;
  std::size_t words;
};

/// Every label sequence reachable in T frames, scored by summing all its paths.
std::vector<Scored> brute_force(const Tensor& lp, const lm::LmScorer* lm, double alpha, double beta) {
  const std::size_t t = lp.rows(), v = lp.cols();
  std::map<std::vector<int>, double> am;
  std::vector<std::size_t> path(t, 0);
  while (true) {
    std::vector<int> labels;
    std::size_t prev = v;
    double s = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      s += lp(i, path[i]);
      if (path[i] != 0 && path[i] != prev) labels.push_back(static_cast<int>(path[i]) - 1);
      prev = path[i];
    }
    auto it = am.emplace(labels, -INFINITY).first;
    it->second = log_add(it->second, s);
    std::size_t i = 0;
    while (i < t && ++path[i] == v) path[i++] = 0;
    if (i == t) break;
  }
  std::vector<Scored> out;
  for (const auto& [tokens, a] : am) {
    const auto words = split_words(letters().decode(tokens));
    double l = 0.0;
    if (lm) {
      l = lm::lm_logprob(*lm, words);
    }
    out.push_back({tokens, a, l, a + alpha * l + beta * static_cast<double>(words.size()), words.size()});
  }
  std::sort(out.begin(), out.end(), [](const Scored& x, const Scored& y) {
    return x.score != y.score ? x.score > y.score : x.tokens < y.tokens;
  });
  return out;
}

TEST(BeamSearch, ExhaustiveModeMatchesBruteForce) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ua(0.0, 3.0), ub(-2.0, 2.0);
  for (int trial = 0; trial < 250; ++trial) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    const Tensor lp = random_log_probs(t, 4, rng);
    FusionConfig f;
    f.alpha = trial % 5 == 0 ? 0.0 : ua(rng);
    f.beta = trial % 7 == 0 ? 0.0 : ub(rng);
    f.exhaustive = true;
    f.nbest = 1000;
    const auto list = fused_beam_search(lp, letters(), &word_lm(), f);
    const auto oracle = brute_force(lp, &word_lm(), f.alpha, f.beta);
    ASSERT_FALSE(list.hyps.empty());
    EXPECT_EQ(list.hyps.size(), oracle.size());
    EXPECT_EQ(list.best().tokens, oracle.front().tokens) << "trial " << trial;
    EXPECT_NEAR(list.best().score, oracle.front().score, 1e-9);
    EXPECT_NEAR(list.best().am, oracle.front().am, 1e-9);
    EXPECT_NEAR(list.best().lm, oracle.front().lm, 1e-9);
    EXPECT_EQ(list.best().words, oracle.front().words);
  }
}

TEST(BeamSearch, NoFusionEqualsPureAcousticPrefixSearch) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    const Tensor lp = random_log_probs(t, 4, rng);
    FusionConfig f;
    f.exhaustive = true;
    f.nbest = 1000;
    const auto fused = fused_beam_search(lp, letters(), &word_lm(), f);
    const auto pure = fused_beam_search(lp, letters(), nullptr, f);
    const auto oracle = brute_force(lp, nullptr, 0.0, 0.0);
    EXPECT_EQ(fused.best().tokens, pure.best().tokens);
    EXPECT_EQ(pure.best().tokens, oracle.front().tokens);
    EXPECT_EQ(fused.best().score, pure.best().score);
  }
}

TEST(BeamSearch, ScoreDecompositionAndBetaLinearity) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor lp = random_log_probs(4, 4, rng);
    FusionConfig f;
    f.alpha = 1.3;
    f.beta = -0.4;
    f.exhaustive = true;
    f.nbest = 1000;
    const auto a = fused_beam_search(lp, letters(), &word_lm(), f);
    f.beta += 0.75;
    const auto b = fused_beam_search(lp, letters(), &word_lm(), f);
    std::map<std::vector<int>, const Hypothesis*> by_tokens;
    for (const auto& h : b.hyps) by_tokens[h.tokens] = &h;
    for (const auto& h : a.hyps) {
      EXPECT_NEAR(h.score, h.am + 1.3 * h.lm - 0.4 * static_cast<double>(h.words), 1e-9);
      const auto* o = by_tokens.at(h.tokens);
      EXPECT_NEAR(o->score - h.score, 0.75 * static_cast<double>(h.words), 1e-9);
    }
  }
}

TEST(BeamSearch, TopScoreNonDecreasingInBeam) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor lp = random_log_probs(10, 4, rng, 1.5);
    double prev = -INFINITY;
    for (std::size_t beam : {1u, 2u, 4u, 8u, 16u, 64u}) {
      FusionConfig f;
      f.alpha = 0.8;
      f.beta = 0.3;
      f.beam = beam;
      f.nbest = 1;
      const double s = fused_beam_search(lp, letters(), &word_lm(), f).best().score;
      EXPECT_GE(s, prev - 1e-12) << "beam " << beam;
      prev = s;
    }
  }
}

TEST(BeamSearch, NoDuplicatesAndSortedOutput) {
  std::mt19937_64 rng(3);
  const Tensor lp = random_log_probs(8, 4, rng);
  FusionConfig f;
  f.alpha = 1.0;
  f.beam = 20;
  f.nbest = 20;
  const auto l = fused_beam_search(lp, letters(), &word_lm(), f);
  for (std::size_t i = 1; i < l.hyps.size(); ++i) {
    EXPECT_TRUE(ranks_before(l.hyps[i - 1], l.hyps[i]));
    EXPECT_GE(l.hyps[i - 1].score, l.hyps[i].score);
  }
  std::set<std::vector<int>> seen;
  for (const auto& h : l.hyps) EXPECT_TRUE(seen.insert(h.tokens).second);
}

TEST(BeamSearch, InvalidConfig) {
  FusionConfig f;
  f.beam = 0;
  EXPECT_THROW(fused_beam_search(Tensor::matrix(2, 4), letters(), nullptr, f), ConfigError);
}

Hypothesis hyp(std::vector<int> tokens, double score) {
  Hypothesis h;
  h.tokens = std::move(tokens);
  h.score = score;
  return h;
}

TEST(Prune, MatchesSortThenTruncate) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    NBestList l;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<int> tok(std::uniform_int_distribution<std::size_t>(0, 3)(rng));
      for (int& x : tok) x = std::uniform_int_distribution<int>(0, 2)(rng);
      // coarse scores force ties
      l.hyps.push_back(hyp(tok, std::uniform_int_distribution<int>(-3, 0)(rng)));
    }
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 35)(rng);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto &x = l.hyps[a], &y = l.hyps[b];
      if (x.score != y.score) return x.score > y.score;
      return std::lexicographical_compare(x.tokens.begin(), x.tokens.end(), y.tokens.begin(), y.tokens.end());
    });
    const auto p = nbest_prune(l, k);
    ASSERT_EQ(p.hyps.size(), std::min(k, n));
    for (std::size_t i = 0; i < p.hyps.size(); ++i) {
      EXPECT_EQ(p.hyps[i].tokens, l.hyps[idx[i]].tokens);
      EXPECT_EQ(p.hyps[i].score, l.hyps[idx[i]].score);
    }
  }
}

TEST(Prune, TopOneAndIdentity) {
  std::mt19937_64 rng(2);
  const Tensor lp = random_log_probs(6, 4, rng);
  FusionConfig f;
  f.beam = 10;
  f.nbest = 10;
  const auto l = fused_beam_search(lp, letters(), &word_lm(), f);
  EXPECT_EQ(nbest_prune(l, 1).best().tokens, l.best().tokens);
  const auto all = nbest_prune(l, 100);
  ASSERT_EQ(all.hyps.size(), l.hyps.size());
  for (std::size_t i = 0; i < l.hyps.size(); ++i) EXPECT_EQ(all.hyps[i].tokens, l.hyps[i].tokens);
  EXPECT_THROW(nbest_prune(l, 0), ConfigError);
}

TEST(Rescore, IdentityRescoringKeepsRanking) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor lp = random_log_probs(6, 4, rng);
    FusionConfig f;
    f.alpha = 0.9;
    f.beta = 0.5;
    f.beam = 16;
    f.nbest = 16;
    const auto l = fused_beam_search(lp, letters(), &word_lm(), f);
    const auto r = rescore(l, word_lm(), 0.9, 0.5);
    ASSERT_EQ(r.hyps.size(), l.hyps.size());
    for (std::size_t i = 0; i < l.hyps.size(); ++i) {
      EXPECT_EQ(r.hyps[i].tokens, l.hyps[i].tokens);
      EXPECT_NEAR(r.hyps[i].score, l.hyps[i].score, 1e-9);
      EXPECT_EQ(r.hyps[i].lm, l.hyps[i].lm);
    }
  }
}

TEST(Rescore, TwoHypothesisHandCase) {
  lm::UniformLm strong(4);  // every event ln(1/4)
  NBestList l;
  Hypothesis a = hyp({0}, 0.0), b = hyp({1}, 0.0);
  a.text = "x";
  a.am = -1.0;
  a.words = 1;
  b.text = "y y y";
  b.am = -0.5;
  b.words = 3;
  l.hyps = {b, a};
  // a: -1 + 2 * 2 ln(1/4) + 1 * 1 = -5.5452; b: -0.5 + 2 * 4 ln(1/4) + 1 * 3 = -8.5904
  const auto r = rescore(l, strong, 2.0, 1.0);
  EXPECT_EQ(r.hyps[0].text, "x");
  EXPECT_NEAR(r.hyps[0].score, -1.0 + 2.0 * 2.0 * std::log(0.25) + 1.0, 1e-12);
  EXPECT_NEAR(r.hyps[1].score, -0.5 + 2.0 * 4.0 * std::log(0.25) + 3.0, 1e-12);
  EXPECT_NEAR(r.hyps[0].lm2, 2.0 * std::log(0.25), 1e-12);
  // a large insertion bonus flips the order
  EXPECT_EQ(rescore(l, strong, 2.0, 5.0).hyps[0].text, "y y y");
}

TEST(Rescore, PermutationInvariant) {
  std::mt19937_64 rng(10);
  const Tensor lp = random_log_probs(7, 4, rng);
  FusionConfig f;
  f.alpha = 0.5;
  f.beam = 12;
  f.nbest = 12;
  auto l = fused_beam_search(lp, letters(), &word_lm(), f);
  const auto a = rescore(l, word_lm(), 1.7, -0.3);
  std::shuffle(l.hyps.begin(), l.hyps.end(), rng);
  const auto b = rescore(l, word_lm(), 1.7, -0.3);
  for (std::size_t i = 0; i < a.hyps.size(); ++i) EXPECT_EQ(a.hyps[i].tokens, b.hyps[i].tokens);
}

TEST(NBestFile, RoundTrip) {
  const auto dir = semiasr::testing::temp_dir("nbest");
  std::mt19937_64 rng(1);
  FusionConfig f;
  f.beam = 5;
  f.nbest = 5;
  auto l = fused_beam_search(random_log_probs(6, 4, rng), letters(), &word_lm(), f);
  l.id = "utt-1";
  {
    std::ofstream out(dir / "n.jsonl");
    write_nbest_line(out, l);
  }
  const auto r = read_nbest_file(dir / "n.jsonl");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].id, "utt-1");
  ASSERT_EQ(r[0].hyps.size(), l.hyps.size());
  for (std::size_t i = 0; i < l.hyps.size(); ++i) {
    EXPECT_EQ(r[0].hyps[i].text, l.hyps[i].text);
    EXPECT_EQ(r[0].hyps[i].score, l.hyps[i].score);
  }
}

/// Asymptotic Kolmogorov-Smirnov p-value of statistic d over n samples.
double ks_p_value(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int k = 1; k < 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

double ks_uniform(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = (x[i] - lo) / (hi - lo);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return ks_p_value(d, x.size());
}

TEST(Tuner, SamplesUniformOverRanges) {
  TuneConfig c;
  c.seed = 17;
  const auto trials = sample_trials(c, 10000);
  std::vector<double> a, b, a2, b2;
  for (const auto& t : trials) {
    ASSERT_GE(t.alpha, 0.0);
    ASSERT_LE(t.alpha, 5.0);
    ASSERT_GE(t.beta, -5.0);
    ASSERT_LE(t.beta, 5.0);
    a.push_back(t.alpha);
    b.push_back(t.beta);
    a2.push_back(t.alpha2);
    b2.push_back(t.beta2);
  }
  EXPECT_GT(ks_uniform(a, 0, 5), 0.01);
  EXPECT_GT(ks_uniform(b, -5, 5), 0.01);
  EXPECT_GT(ks_uniform(a2, 0, 5), 0.01);
  EXPECT_GT(ks_uniform(b2, -5, 5), 0.01);
  // the statistic rejects a visibly non-uniform sample
  std::vector<double> skew;
  for (double v : a) skew.push_back(v * v / 5.0);
  EXPECT_LT(ks_uniform(skew, 0, 5), 0.01);
}

TEST(Tuner, TrialPrefixIsStable) {
  TuneConfig c;
  const auto few = sample_trials(c, 3);
  const auto many = sample_trials(c, 128);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(few[i].alpha, many[i].alpha);
    EXPECT_EQ(few[i].beta2, many[i].beta2);
  }
}

struct TuneFixture {
  std::vector<std::string> refs{"ab a", "b ab", "a b", "ba b"};
  std::vector<Tensor> emissions;
  lm::NGramModel lm = lm::NGramModel::train({{"aa", "ba"}, {"bb"}, {"aa"}}, lm::NGramConfig{});

  TuneFixture() {
    // near one-hot emissions along each reference, two frames per symbol
    for (const auto& r : refs) {
      const auto ids = letters().encode(r);
      Tensor e = Tensor::matrix(ids.size() * 2 + 1, 4, std::log(0.02));
      std::size_t row = 0;
      for (int id : ids) {
        e(row++, static_cast<std::size_t>(id) + 1) = std::log(0.94);
        e(row++, 0) = std::log(0.94);
      }
      e(row, 0) = std::log(0.94);
      emissions.push_back(e);
    }
  }
};

TEST(Tuner, OneTrialReturnsThatSample) {
  TuneFixture fx;
  TuneConfig c;
  c.trials = 1;
  c.fusion.beam = 8;
  c.fusion.nbest = 4;
  const auto r = tune_random_search(fx.refs, fx.emissions, letters(), &fx.lm, nullptr, c);
  const auto s = sample_trials(c, 1);
  ASSERT_EQ(r.table.size(), 1u);
  EXPECT_EQ(r.best.weights.alpha, s[0].alpha);
  EXPECT_EQ(r.best.weights.beta, s[0].beta);
  EXPECT_EQ(r.best.trial, 1u);
}

TEST(Tuner, DeterministicAndCsvHas128Rows) {
  TuneFixture fx;
  TuneConfig c;
  c.fusion.beam = 8;
  c.fusion.nbest = 4;
  const auto a = tune_random_search(fx.refs, fx.emissions, letters(), &fx.lm, &fx.lm, c);
  const auto b = tune_random_search(fx.refs, fx.emissions, letters(), &fx.lm, &fx.lm, c);
  ASSERT_EQ(a.table.size(), 128u);
  for (std::size_t i = 0; i < 128; ++i) {
    EXPECT_EQ(a.table[i].dev_wer, b.table[i].dev_wer);
    EXPECT_EQ(a.table[i].weights.alpha2, b.table[i].weights.alpha2);
  }
  EXPECT_EQ(a.best.trial, b.best.trial);
  for (const auto& t : a.table) {
    EXPECT_GE(t.dev_wer, a.best.dev_wer);
    if (t.dev_wer == a.best.dev_wer) EXPECT_GE(t.trial, a.best.trial);
  }
  const auto dir = semiasr::testing::temp_dir("tune");
  write_tune_csv(dir / "tune.csv", a);
  std::ifstream in(dir / "tune.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "trial,alpha,beta,alpha2,beta2,dev_wer");
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += !line.empty();
  EXPECT_EQ(rows, 128u);
}

TEST(Tuner, WinnerNoWorseThanFixedPointWhenLmMisleads) {
  TuneFixture fx;
  TuneConfig c;
  c.fusion.beam = 8;
  c.fusion.nbest = 4;
  const auto r = tune_random_search(fx.refs, fx.emissions, letters(), &fx.lm, nullptr, c);
  TwoPassConfig fixed;
  fixed.fusion = c.fusion;
  fixed.fusion.alpha = 2.5;
  fixed.fusion.beta = 0.0;
  std::vector<std::string> hyps;
  for (const auto& e : fx.emissions) {
    hyps.push_back(two_pass([&](const FusionConfig& f) { return fused_beam_search(e, letters(), &fx.lm, f); }, nullptr,
                            fixed)
                       .best()
                       .text);
  }
  const double at_fixed = eval::corpus_wer(fx.refs, hyps).wer();
  EXPECT_LE(r.best.dev_wer, at_fixed);
  EXPECT_EQ(r.best.dev_wer, 0.0);
  EXPECT_GT(at_fixed, 0.0);
}

TEST(Tuner, EmptyDevSetRejected) {
  TuneConfig c;
  EXPECT_THROW(tune_random_search({}, std::vector<Tensor>{}, letters(), nullptr, nullptr, c), Error);
}

}  // namespace
}  // namespace semiasr::decode
