// tests/unit/test_pretrain.cpp
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "semiasr/corpus/synth.hpp"
#include "semiasr/error.hpp"
#include "semiasr/pretrain/pretrain.hpp"
#include "semiasr/util.hpp"

namespace semiasr::pretrain {
namespace {

using nn::Graph;
using nn::Tensor;
using nn::Var;
using wav2vec::MaskSet;

MaskSet mask_of(std::size_t t, const std::vector<std::size_t>& on) {
  MaskSet m;
  m.covered.assign(t, false);
  for (auto i : on) m.covered[i] = true;
  m.starts = on;
  return m;
}

TEST(Distractors, ZeroAndExactCount) {
  std::mt19937_64 rng(1);
  const MaskSet m = mask_of(10, {1, 2, 5, 7});
  EXPECT_TRUE(sample_distractors(m, 2, 0, rng).empty());
  auto d = sample_distractors(m, 2, 3, rng);
  std::sort(d.begin(), d.end());
  EXPECT_EQ(d, (std::vector<std::size_t>{1, 5, 7}));
}

TEST(Distractors, WithReplacementWhenShort) {
  std::mt19937_64 rng(1);
  const MaskSet m = mask_of(10, {3, 4});
  const auto d = sample_distractors(m, 3, 5, rng);
  ASSERT_EQ(d.size(), 5u);
  for (auto i : d) EXPECT_EQ(i, 4u);
}

TEST(Distractors, Errors) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_distractors(mask_of(5, {2}), 2, 1, rng), Error);
  EXPECT_THROW(sample_distractors(mask_of(5, {2, 3}), 1, 1, rng), Error);
  EXPECT_NO_THROW(sample_distractors(mask_of(5, {2}), 2, 0, rng));
}

TEST(Distractors, UniformOverCandidates) {
  std::mt19937_64 rng(77);
  const MaskSet m = mask_of(12, {0, 2, 4, 6, 8, 10});
  std::vector<double> counts(12, 0.0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[sample_distractors(m, 4, 1, rng)[0]] += 1.0;
  const double p = 0.2, sd = std::sqrt(draws * p * (1 - p));
  for (std::size_t c : {0u, 2u, 6u, 8u, 10u}) EXPECT_LE(std::abs(counts[c] - draws * p), 3 * sd) << c;
  EXPECT_EQ(counts[4], 0.0);
}

// Independent scalar form of the objective.
double brute_loss(const std::vector<double>& c, const std::vector<std::vector<double>>& cands) {
  auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
    return ab / std::sqrt(aa * bb);
  };
  double denom = 0.0;
  for (const auto& q : cands) denom += std::exp(cosine(c, q));
  return -std::log(std::exp(cosine(c, cands[0])) / denom);
}

TEST(Contrastive, EqualSimilaritiesGiveLogKPlusOne) {
  for (std::size_t k : {1u, 4u, 10u, 20u}) {
    Graph g;
    const std::size_t m = k + 1;
    Tensor ctx = Tensor::matrix(m, 3, 1.0);
    Tensor tgt = Tensor::matrix(m, 3, 2.0);
    std::vector<std::vector<std::size_t>> d;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<std::size_t> row;
      for (std::size_t j = 0; j < m; ++j)
        if (j != i) row.push_back(j);
      d.push_back(row);
    }
    auto terms = contrastive_loss(g.constant(ctx), g.constant(tgt), d);
    for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(terms.per_position.value()[i], std::log(k + 1.0), 1e-15);
  }
}

TEST(Contrastive, NoDistractorsGivesZero) {
  Graph g;
  auto terms = contrastive_loss(g.constant(Tensor::from_rows({{1, 2}, {3, -1}})),
                                g.constant(Tensor::from_rows({{0.5, 1}, {2, 2}})), {{}, {}});
  for (double v : terms.per_position.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Contrastive, RandomInstancesMatchScalarOracle) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 8, dim = 4, k = 5;
    Tensor ctx = Tensor::matrix(m, dim), tgt = Tensor::matrix(m, dim);
    for (double& v : ctx.values()) v = n(rng);
    for (double& v : tgt.values()) v = n(rng);
    std::vector<std::vector<std::size_t>> d(m);
    for (std::size_t i = 0; i < m; ++i)
      while (d[i].size() < k) {
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
        if (j != i) d[i].push_back(j);
      }
    Graph g;
    auto terms = contrastive_loss(g.constant(ctx), g.constant(tgt), d);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> c(ctx.row_span(i).begin(), ctx.row_span(i).end());
      std::vector<std::vector<double>> cands{{tgt.row_span(i).begin(), tgt.row_span(i).end()}};
      std::vector<std::vector<double>> dv;
      for (auto j : d[i]) {
        cands.emplace_back(tgt.row_span(j).begin(), tgt.row_span(j).end());
        dv.push_back(cands.back());
      }
      const double expect = brute_loss(c, cands);
      EXPECT_NEAR(terms.per_position.value()[i], expect, 1e-12);
      EXPECT_NEAR(contrastive_loss_value(ctx.row_span(i), tgt.row_span(i), dv), expect, 1e-12);
    }
  }
}

TEST(Contrastive, InvariantToPositiveRescaling) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  Tensor ctx = Tensor::matrix(4, 3), tgt = Tensor::matrix(4, 3);
  for (double& v : ctx.values()) v = n(rng);
  for (double& v : tgt.values()) v = n(rng);
  const std::vector<std::vector<std::size_t>> d{{1, 2}, {0, 3}, {3, 1}, {0, 2}};
  Graph g;
  const Tensor a = contrastive_loss(g.constant(ctx), g.constant(tgt), d).per_position.value();
  Tensor t2 = tgt, c2 = ctx;
  for (std::size_t c = 0; c < 3; ++c) t2(2, c) *= 7.5, c2(1, c) *= 0.01;
  const Tensor b = contrastive_loss(g.constant(c2), g.constant(t2), d).per_position.value();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Contrastive, ZeroNormVectorThrows) {
  EXPECT_THROW(contrastive_loss_value(std::vector<double>{0, 0}, std::vector<double>{1, 0}, {}), Error);
}

TEST(Diversity, ReferenceValues) {
  EXPECT_NEAR(diversity_penalty({{0.25, 0.25, 0.25, 0.25}}), 0.0, 1e-12);
  EXPECT_NEAR(diversity_penalty({{0.0, 1.0, 0.0}}), 1.0, 1e-12);
  const double h = -(0.9 * std::log(0.9) + 0.1 * std::log(0.1));
  EXPECT_NEAR(h, 0.3251, 1e-4);
  EXPECT_NEAR(diversity_penalty({{0.9, 0.1}}), 1.0 - h / std::log(2.0), 1e-12);
  EXPECT_NEAR(diversity_penalty({{0.9, 0.1}}), 0.5310, 1e-4);
  EXPECT_NEAR(diversity_penalty({{0.5, 0.5}, {1.0, 0.0}}), 0.5, 1e-12);
}

TEST(Diversity, RejectsUnnormalizedAndStaysInUnitInterval) {
  EXPECT_THROW(diversity_penalty({{0.5, 0.6}}), Error);
  std::mt19937_64 rng(3);
  std::gamma_distribution<double> gam(0.3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> p(8);
    double s = 0.0;
    for (double& v : p) s += (v = gam(rng) + 1e-300);
    for (double& v : p) v /= s;
    const double d = diversity_penalty({p});
    EXPECT_GE(d, -1e-12);
    EXPECT_LE(d, 1.0 + 1e-12);
  }
}

TEST(Diversity, GraphFormMatchesScalarForm) {
  Graph g;
  const std::vector<double> p{0.1, 0.2, 0.7}, q{0.3, 0.3, 0.4};
  Var v = diversity_penalty({g.constant(Tensor::row(p)), g.constant(Tensor::row(q))});
  EXPECT_NEAR(v.value().item(), diversity_penalty({p, q}), 1e-12);
}

struct SmallSetup {
  corpus::Corpus corpus;
  std::vector<const corpus::Utterance*> utts;
  wav2vec::Wav2VecConfig config;

  explicit SmallSetup(std::size_t n) {
    corpus::GrammarOptions o;
    corpus = corpus::synth_generate(corpus::make_grammar(o, 1), 3, n, {0.0, 1.0, 0.0, 0.0});
    for (const auto& u : corpus.utterances) utts.push_back(&u);
    config.encoder.layers = {{5, 10, 32}, {4, 8, 32}, {4, 8, 32}, {2, 4, 32}};
    config.context.blocks = 2;
    config.context.dim = 64;
    config.context.ffn_dim = 128;
    config.quantizer.logit_init_scale = 10.0;
    config.mask = {4, 0.1};
  }
};

TEST(PretrainRun, UntrainedAccuracyIsChance) {
  SmallSetup s(200);
  wav2vec::Wav2VecModel m(s.config, 5);
  PretrainConfig pc;
  pc.distractors = 10;
  std::size_t positions = 0;
  // positions counted with the same masks evaluate_contrastive draws
  for (const auto* u : s.utts) {
    std::mt19937_64 rng(derive_seed(9, u->id + "#0"));
    const auto t = wav2vec::encoder_output_length(u->samples.size(), s.config.encoder);
    const auto mask = wav2vec::sample_masks(t, s.config.mask, rng);
    if (mask.count() >= 2) positions += mask.count();
  }
  const auto r = evaluate_contrastive(s.utts, m, pc, 9);
  const double p = 1.0 / 11.0;
  const double sd = std::sqrt(p * (1 - p) / static_cast<double>(positions));
  EXPECT_LE(std::abs(r.contrastive_accuracy - p), 3 * sd) << r.contrastive_accuracy << " over " << positions;
}

TEST(PretrainRun, ZeroLambdaLossIsContrastiveTerm) {
  SmallSetup s(16);
  wav2vec::Wav2VecModel m(s.config, 5);
  PretrainConfig a;
  a.distractors = 5;
  a.diversity_weight = 0.0;
  PretrainConfig b = a;
  b.diversity_weight = 0.5;
  const auto ra = evaluate_contrastive(s.utts, m, a, 1);
  const auto rb = evaluate_contrastive(s.utts, m, b, 1);
  EXPECT_NEAR(rb.loss - ra.loss, 0.5 * rb.diversity, 1e-12);
  EXPECT_EQ(ra.diversity, rb.diversity);
}

TEST(PretrainRun, ZeroEpochsKeepsInitialization) {
  SmallSetup s(4);
  wav2vec::Wav2VecModel m(s.config, 5);
  const auto before = m.params().entries();
  PretrainConfig pc;
  pc.epochs = 0;
  EXPECT_TRUE(pretrain_run(s.utts, m, pc).epochs.empty());
  for (const auto& [name, p] : before) {
    const auto& now = m.params().at(name).value;
    for (std::size_t i = 0; i < now.size(); ++i) ASSERT_EQ(now[i], p.value[i]) << name;
  }
}

TEST(PretrainRun, AccuracyImprovesOverFrozenRandomModel) {
  SmallSetup s(140);
  std::vector<const corpus::Utterance*> train(s.utts.begin(), s.utts.begin() + 120);
  std::vector<const corpus::Utterance*> held(s.utts.begin() + 120, s.utts.end());
  PretrainConfig pc;
  pc.distractors = 10;
  pc.similarity_temperature = 0.1;
  pc.learning_rate = 1e-3;
  pc.epochs = 4;
  wav2vec::Wav2VecModel frozen(s.config, 5);
  wav2vec::Wav2VecModel trained(s.config, 5);
  const auto r = pretrain_run(train, trained, pc);
  ASSERT_EQ(r.epochs.size(), 4u);
  const double before = evaluate_contrastive(held, frozen, pc, 3).contrastive_accuracy;
  const double after = evaluate_contrastive(held, trained, pc, 3).contrastive_accuracy;
  EXPECT_GT(after, before);
  EXPECT_GT(r.epochs.back().contrastive_accuracy, r.epochs.front().contrastive_accuracy);
}

TEST(PretrainRun, DeterministicGivenSeed) {
  SmallSetup s(16);
  PretrainConfig pc;
  pc.distractors = 5;
  pc.epochs = 1;
  wav2vec::Wav2VecModel a(s.config, 5), b(s.config, 5);
  const auto ra = pretrain_run(s.utts, a, pc);
  const auto rb = pretrain_run(s.utts, b, pc);
  EXPECT_EQ(ra.epochs[0].loss, rb.epochs[0].loss);
  for (const auto& [name, p] : a.params().entries()) {
    const auto& q = b.params().at(name).value;
    for (std::size_t i = 0; i < q.size(); ++i) ASSERT_EQ(q[i], p.value[i]) << name;
  }
}

TEST(PretrainRun, EmptyInputRejected) {
  SmallSetup s(1);
  wav2vec::Wav2VecModel m(s.config, 5);
  EXPECT_THROW(pretrain_run({}, m, PretrainConfig{}), Error);
}

}  // namespace
}  // namespace semiasr::pretrain
