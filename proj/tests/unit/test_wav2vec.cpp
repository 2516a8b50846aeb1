// tests/unit/test_wav2vec.cpp
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "semiasr/error.hpp"
#include "semiasr/nn/grad_check.hpp"
#include "semiasr/wav2vec/config_io.hpp"
#include "semiasr/wav2vec/model.hpp"
#include "test_util.hpp"

namespace semiasr::wav2vec {
namespace {

using nn::Graph;
using nn::Tensor;
using nn::Var;

Wav2VecConfig tiny_config() {
  Wav2VecConfig c;
  c.encoder.layers = {{5, 10, 8}, {2, 4, 8}};
  c.context.blocks = 2;
  c.context.dim = 16;
  c.context.ffn_dim = 24;
  c.context.heads = 4;
  c.quantizer.groups = 2;
  c.quantizer.entries = 6;
  c.quantizer.codeword_dim = 4;
  return c;
}

std::vector<float> noise_signal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 0.3f);
  std::vector<float> x(n);
  for (float& v : x) v = d(rng);
  return x;
}

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values()) v = d(rng);
  return t;
}

TEST(ReceptiveField, PaperEncoderIs400By320) {
  const auto rf = receptive_field(FeatureEncoderConfig::large());
  EXPECT_EQ(rf.samples, 400u);
  EXPECT_EQ(rf.stride, 320u);
  // 25 ms and 20 ms at 16 kHz
  EXPECT_DOUBLE_EQ(rf.samples / 16.0, 25.0);
  EXPECT_DOUBLE_EQ(rf.stride / 16.0, 20.0);
  EXPECT_EQ(encoder_output_length(400, FeatureEncoderConfig::large()), 1u);
  EXPECT_EQ(encoder_output_length(399, FeatureEncoderConfig::large()), 0u);
}

TEST(ReceptiveField, SmallHandCases) {
  FeatureEncoderConfig one;
  one.layers = {{5, 10, 4}};
  EXPECT_EQ(receptive_field(one).samples, 10u);
  EXPECT_EQ(receptive_field(one).stride, 5u);
  EXPECT_EQ(encoder_output_length(20, one), 3u);
  FeatureEncoderConfig two;
  two.layers = {{2, 2, 4}, {2, 2, 4}};
  EXPECT_EQ(receptive_field(two).samples, 4u);
  EXPECT_EQ(receptive_field(two).stride, 4u);
}

TEST(ReceptiveField, RandomConfigsMatchRecurrenceAndModel) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    FeatureEncoderConfig e;
    e.layers.clear();
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int i = 0; i < n; ++i) {
      const std::size_t s = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
      const std::size_t k = s + std::uniform_int_distribution<std::size_t>(0, 4)(rng);
      e.layers.push_back({s, k, 3});
    }
    const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 400)(rng);
    std::size_t t = len;
    bool ok = true;
    for (const auto& l : e.layers) {
      if (t < l.kernel) {
        ok = false;
        break;
      }
      t = (t - l.kernel) / l.stride + 1;
    }
    EXPECT_EQ(encoder_output_length(len, e), ok ? t : 0u);
    EXPECT_EQ(encoder_output_length(receptive_field(e).samples, e), 1u);
    if (ok && trial % 5 == 0) {
      Wav2VecConfig c = tiny_config();
      c.encoder = e;
      Wav2VecModel m(c, 1);
      Graph g(&m.params());
      EXPECT_EQ(m.encode_features(g, noise_signal(len, 3)).rows(), t);
    }
  }
}

TEST(Encoder, TooShortInputNamesMinimum) {
  Wav2VecModel m(tiny_config(), 1);
  Graph g(&m.params());
  const auto rf = receptive_field(m.config().encoder).samples;
  try {
    m.encode_features(g, noise_signal(rf - 1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(std::to_string(rf)), std::string::npos);
  }
}

TEST(Masks, DegenerateCases) {
  std::mt19937_64 rng(1);
  const auto none = sample_masks(50, {10, 0.0}, rng);
  EXPECT_EQ(none.count(), 0u);
  EXPECT_TRUE(none.starts.empty());
  const auto all = sample_masks(5, {10, 1.0}, rng);
  EXPECT_EQ(all.count(), 5u);
}

TEST(Masks, CoveredIsUnionOfTruncatedSpans) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = 1 + trial * 3;
    const MaskConfig c{1 + static_cast<std::size_t>(trial % 7), 0.15};
    const auto m = sample_masks(t, c, rng);
    std::vector<bool> expect(t, false);
    for (std::size_t s : m.starts) {
      ASSERT_LT(s, t);
      const std::size_t end = std::min(s + c.span, t);
      EXPECT_EQ(end - s, std::min(c.span, t - s));
      for (std::size_t i = s; i < end; ++i) expect[i] = true;
    }
    EXPECT_EQ(m.covered, expect);
  }
}

TEST(Masks, CoverageMatchesClosedForm) {
  const std::size_t t = 10000, span = 10;
  const double p = 0.065, q = 1.0 - p;
  std::mt19937_64 rng(2024);
  const auto m = sample_masks(t, {span, p}, rng);
  // exact expectation with truncation at the start, covariance from overlapping windows
  double mean = 0.0;
  for (std::size_t i = 0; i < t; ++i) mean += 1.0 - std::pow(q, static_cast<double>(std::min(i + 1, span)));
  const double u = std::pow(q, static_cast<double>(span));
  double var = u * (1.0 - u);
  for (std::size_t d = 1; d < span; ++d) var += 2.0 * (std::pow(q, static_cast<double>(span + d)) - u * u);
  const double sd = std::sqrt(var * static_cast<double>(t));
  EXPECT_LE(std::abs(static_cast<double>(m.count()) - mean), 3.0 * sd);
  EXPECT_NEAR(mean / t, 1.0 - u, 1e-3);
}

TEST(Quantizer, EvalModeIsDeterministicArgmaxCodeword) {
  Wav2VecModel m(tiny_config(), 5);
  const Tensor z = random_matrix(7, 8, 1);
  Graph g(&m.params());
  auto a = m.quantize(g, g.constant(z), QuantizeMode::kEval, 1.0);
  auto b = m.quantize(g, g.constant(z), QuantizeMode::kEval, 1.0);
  const auto& qc = m.config().quantizer;
  ASSERT_EQ(a.q.cols(), qc.groups * qc.codeword_dim);
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t grp = 0; grp < qc.groups; ++grp) {
      const auto& probs = a.probs[grp].value();
      std::size_t best = 0;
      for (std::size_t k = 1; k < qc.entries; ++k)
        if (probs(r, k) > probs(r, best)) best = k;
      EXPECT_EQ(a.codes[r][grp], best);
      const Tensor& cb = m.params().at("quant.codebook." + std::to_string(grp)).value;
      for (std::size_t d = 0; d < qc.codeword_dim; ++d)
        EXPECT_EQ(a.q.value()(r, grp * qc.codeword_dim + d), cb(best, d));
    }
  }
  for (std::size_t i = 0; i < a.q.value().size(); ++i) EXPECT_EQ(a.q.value()[i], b.q.value()[i]);
}

TEST(Quantizer, TrainModeForwardsHardCodewords) {
  Wav2VecModel m(tiny_config(), 5);
  const Tensor z = random_matrix(9, 8, 2);
  Graph g(&m.params());
  std::mt19937_64 rng(3);
  auto out = m.quantize(g, g.constant(z), QuantizeMode::kTrain, 2.0, &rng);
  const auto& qc = m.config().quantizer;
  for (std::size_t r = 0; r < 9; ++r)
    for (std::size_t grp = 0; grp < qc.groups; ++grp) {
      const Tensor& cb = m.params().at("quant.codebook." + std::to_string(grp)).value;
      for (std::size_t d = 0; d < qc.codeword_dim; ++d)
        EXPECT_NEAR(out.q.value()(r, grp * qc.codeword_dim + d), cb(out.codes[r][grp], d), 1e-15);
    }
}

TEST(Quantizer, SoftPathGradientWithFrozenNoise) {
  Wav2VecConfig c = tiny_config();
  c.context.blocks = 1;
  Wav2VecModel m(c, 8);
  const Tensor z = random_matrix(5, 8, 4);
  const Tensor w = random_matrix(5, c.quantizer.entries, 6);
  auto loss = [&](Graph& g) {
    std::mt19937_64 rng(17);
    auto out = m.quantize(g, g.constant(z), QuantizeMode::kTrain, 0.7, &rng);
    Var l = nn::sum(nn::mul(out.gumbel_soft[0], g.constant(w)));
    return nn::add(l, nn::sum(nn::mul(out.gumbel_soft[1], g.constant(w))));
  };
  nn::GradCheckOptions o;
  const auto r = nn::grad_check(loss, m.params(), o);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(Quantizer, StraightThroughGradientEqualsSoftCodewordGradient) {
  Wav2VecModel m(tiny_config(), 8);
  const Tensor z = random_matrix(5, 8, 4);
  const auto& qc = m.config().quantizer;
  const Tensor w = random_matrix(5, qc.codeword_dim, 9);
  auto grad_of = [&](bool hard) {
    m.params().zero_grad();
    Graph g(&m.params());
    std::mt19937_64 rng(17);
    auto out = m.quantize(g, g.constant(z), QuantizeMode::kTrain, 0.7, &rng);
    Var l;
    if (hard) {
      l = nn::sum(nn::mul(nn::slice_cols(out.q, 0, qc.codeword_dim), g.constant(w)));
    } else {
      l = nn::sum(nn::mul(nn::matmul(out.gumbel_soft[0], g.param("quant.codebook.0")), g.constant(w)));
    }
    g.backward(l);
    return m.params().at("quant.logits.w").grad;
  };
  const Tensor a = grad_of(true);
  const Tensor b = grad_of(false);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Context, PermutationEquivariantWithoutPositions) {
  Wav2VecConfig c = tiny_config();
  c.context.positional = PositionalScheme::kNone;
  Wav2VecModel m(c, 3);
  const Tensor z = random_matrix(6, 8, 5);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Tensor zp = Tensor::matrix(6, 8);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < 8; ++k) zp(i, k) = z(perm[i], k);
  Graph g(&m.params());
  const Tensor a = m.contextualize(g, g.constant(z)).value();
  const Tensor b = m.contextualize(g, g.constant(zp)).value();
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) EXPECT_NEAR(b(i, k), a(perm[i], k), 1e-10);
}

TEST(Context, SinglePositionIgnoresQueryAndKey) {
  Wav2VecConfig c = tiny_config();
  c.context.positional = PositionalScheme::kNone;
  Wav2VecModel m(c, 3);
  const Tensor z = random_matrix(1, 8, 5);
  Graph g(&m.params());
  const Tensor a = m.contextualize(g, g.constant(z)).value();
  for (auto& [name, p] : m.params().entries())
    if (name.find(".attn.q.") != std::string::npos || name.find(".attn.k.") != std::string::npos) p.value.fill(0.0);
  Graph g2(&m.params());
  const Tensor b = m.contextualize(g2, g2.constant(z)).value();
  ASSERT_EQ(a.rows(), 1u);
  for (std::size_t k = 0; k < a.cols(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
}

TEST(Context, GradientCheckTwoBlocksDim16) {
  Wav2VecConfig c = tiny_config();
  Wav2VecModel m(c, 21);
  const Tensor z = random_matrix(5, 8, 6);
  const Tensor w = random_matrix(5, 16, 7);
  const std::vector<bool> mask{false, true, true, false, false};
  const auto r = nn::grad_check(
      [&](Graph& g) { return nn::sum(nn::mul(m.contextualize(g, g.constant(z), &mask), g.constant(w))); }, m.params());
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(Context, DimMismatchThrows) {
  Wav2VecModel m(tiny_config(), 1);
  Graph g(&m.params());
  EXPECT_THROW(m.contextualize(g, g.constant(Tensor::matrix(3, 5))), ShapeError);
}

TEST(Config, ValidationAndJsonRoundTrip) {
  Wav2VecConfig c = tiny_config();
  c.context.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.encoder.layers[0].kernel = 2;  // kernel < stride
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  const Wav2VecConfig r = wav2vec_config_from_json(to_json(c));
  EXPECT_EQ(to_json(r), to_json(c));
  try {
    wav2vec_config_from_json(Json{{"context", {{"blockz", 2}}}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "wav2vec.context.blockz");
  }
}

TEST(Config, TemperatureAnnealsTowardsFloor) {
  QuantizerConfig q;
  EXPECT_DOUBLE_EQ(q.temperature(0), 2.0);
  EXPECT_LT(q.temperature(1), 2.0);
  EXPECT_DOUBLE_EQ(q.temperature(100), 0.5);
}

TEST(Checkpoint, SaveLoadPreservesOutputs) {
  const auto dir = semiasr::testing::temp_dir("w2v");
  Wav2VecModel m(tiny_config(), 4);
  save_model(dir / "m.ckpt", m);
  Wav2VecModel r = load_model(dir / "m.ckpt");
  const auto x = noise_signal(600, 2);
  Graph g1(&m.params()), g2(&r.params());
  const Tensor a = m.contextualize(g1, m.encode_features(g1, x)).value();
  const Tensor b = r.contextualize(g2, r.encode_features(g2, x)).value();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

}  // namespace
}  // namespace semiasr::wav2vec
