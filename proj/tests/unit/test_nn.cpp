// tests/unit/test_nn.cpp
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "semiasr/error.hpp"
#include "semiasr/grad_suite.hpp"
#include "semiasr/nn/adam.hpp"
#include "semiasr/nn/checkpoint.hpp"
#include "semiasr/nn/grad_check.hpp"
#include "semiasr/nn/graph.hpp"
#include "semiasr/nn/layers.hpp"
#include "test_util.hpp"

namespace semiasr::nn {
namespace {

TEST(Graph, IdentityAffinePassesGradientThrough) {
  Graph g;
  Var w = g.constant(Tensor::from_rows({{1, 0}, {0, 1}}));
  Var x = g.input(Tensor::from_rows({{1, 2}}), true);
  Var y = matmul(x, w);
  EXPECT_EQ(y.value()(0, 0), 1.0);
  EXPECT_EQ(y.value()(0, 1), 2.0);
  Var upstream = g.constant(Tensor::from_rows({{3, -5}}));
  g.backward(sum(mul(y, upstream)));
  EXPECT_EQ(g.grad(x)(0, 0), 3.0);
  EXPECT_EQ(g.grad(x)(0, 1), -5.0);
}

TEST(Graph, UnusedParameterGetsExactZeroGradient) {
  ParameterSet p(3);
  p.add_weight("used", 2, 2);
  p.add_weight("unused", 2, 2);
  Graph g(&p);
  Var x = g.constant(Tensor::from_rows({{0.5, -1}}));
  g.backward(sum(matmul(x, g.param("used"))));
  for (double v : p.at("unused").grad.values()) EXPECT_EQ(v, 0.0);
  double s = 0.0;
  for (double v : p.at("used").grad.values()) s += std::abs(v);
  EXPECT_GT(s, 0.0);
}

TEST(Graph, NonScalarLossThrows) {
  Graph g;
  Var x = g.input(Tensor::from_rows({{1, 2}}), true);
  EXPECT_THROW(g.backward(x), ShapeError);
}

TEST(Graph, ShapeErrorNamesOpAndShapes) {
  Graph g;
  Var a = g.constant(Tensor::matrix(2, 3));
  Var b = g.constant(Tensor::matrix(2, 3));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
  }
}

TEST(Graph, NonFiniteIntermediateNamesOp) {
  Graph g;
  Var x = g.input(Tensor::from_rows({{-1.0}}), true);
  try {
    log(x);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.where(), "log");
  }
}

TEST(GradCheck, RandomThreeLayerGraph) {
  ParameterSet p(11);
  init_linear(p, "l1", 4, 6);
  init_linear(p, "l2", 6, 5);
  init_linear(p, "l3", 5, 3);
  for (auto& [_, prm] : p.entries()) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (double& v : prm.value.values()) v += u(rng);
  }
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Tensor x = Tensor::matrix(3, 4);
  for (double& v : x.values()) v = n(rng);
  auto loss = [&](Graph& g) {
    Var h = tanh(linear(g, g.constant(x), "l1"));
    h = gelu(linear(g, h, "l2"));
    Var y = linear(g, h, "l3");
    return sum(mul(y, y));
  };
  GradCheckOptions o;
  o.step = 1e-4;
  const auto r = grad_check(loss, p, o);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
  EXPECT_EQ(r.entries_checked, p.scalar_count());
}

TEST(GradCheck, LinearGraphIsExact) {
  ParameterSet p(1);
  p.add_weight("w", 3, 2);
  Tensor x = Tensor::from_rows({{0.3, -1.2, 2.0}});
  const auto r = grad_check([&](Graph& g) { return sum(matmul(g.constant(x), g.param("w"))); }, p);
  EXPECT_LT(r.max_relative_error, 1e-10);
}

TEST(GradCheck, SoftmaxCrossEntropy) {
  ParameterSet p(4);
  p.add_uniform("logits", {3, 5}, 2.0);
  const std::vector<std::size_t> target{1, 4, 0};
  const auto r = grad_check(
      [&](Graph& g) { return scale(sum(pick(log_softmax_rows(g.param("logits")), target)), -1.0); }, p);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(GradCheck, HardArgmaxIsReportedNotZero) {
  ParameterSet p(4);
  p.add_uniform("logits", {2, 3}, 1.0);
  EXPECT_THROW(grad_check([&](Graph& g) { return sum(hard_argmax_rows(g.param("logits"))); }, p),
               NonDifferentiableError);
}

TEST(GradCheck, LinearityOfGradients) {
  ParameterSet p(9);
  p.add_uniform("w", {3, 3}, 1.0);
  Tensor x = Tensor::from_rows({{1, 2, 3}});
  auto l1 = [&](Graph& g) { return sum(tanh(matmul(g.constant(x), g.param("w")))); };
  auto l2 = [&](Graph& g) { return sum(exp(scale(g.param("w"), 0.5))); };
  auto grads = [&](auto f) {
    p.zero_grad();
    Graph g(&p);
    g.backward(f(g));
    return p.at("w").grad;
  };
  const Tensor g1 = grads(l1);
  const Tensor g2 = grads(l2);
  const Tensor g12 = grads([&](Graph& g) { return add(l1(g), l2(g)); });
  for (std::size_t i = 0; i < g12.size(); ++i) EXPECT_NEAR(g12[i], g1[i] + g2[i], 1e-12);
}

TEST(GradSuite, EveryCasePasses) {
  const auto entries = run_gradient_suite(1e-4);
  EXPECT_EQ(entries.size(), gradient_suite_names().size());
  for (const auto& e : entries) {
    EXPECT_TRUE(e.passed) << e.name << " max rel err " << e.result.max_relative_error << " at "
                          << e.result.worst_parameter;
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParameterSet p(1);
  p.add_uniform("w", {2, 2}, 1.0);
  const Tensor before = p.at("w").value;
  OptimizerState s;
  for (int i = 0; i < 3; ++i) adam_step(p, s);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(p.at("w").value[i], before[i]);
}

TEST(Adam, FirstStepMatchesHandComputation) {
  ParameterSet p(1);
  p.add("x", Tensor::scalar(0.0));
  p.at("x").grad = Tensor::scalar(1.0);
  AdamConfig c;
  c.learning_rate = 0.1;
  OptimizerState s(c);
  adam_step(p, s);
  // m = 0.1, v = 0.001, mhat = 1, vhat = 1
  const double expected = -0.1 * 1.0 / (1.0 + c.epsilon);
  EXPECT_NEAR(p.at("x").value.item(), expected, 1e-15);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, IdenticalParametersStayIdentical) {
  ParameterSet p(1);
  p.add("a", Tensor::row({0.5, -0.25}));
  p.add("b", Tensor::row({0.5, -0.25}));
  OptimizerState s;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 20; ++i) {
    const double g0 = n(rng), g1 = n(rng);
    p.at("a").grad = Tensor::row({g0, g1});
    p.at("b").grad = Tensor::row({g0, g1});
    adam_step(p, s);
  }
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(p.at("a").value[i], p.at("b").value[i]);
}

TEST(Adam, NanGradientRejectedWithoutUpdate) {
  ParameterSet p(1);
  p.add("a", Tensor::row({1.0, 2.0}));
  p.add("b", Tensor::row({1.0}));
  p.at("a").grad = Tensor::row({0.5, 0.5});
  p.at("b").grad = Tensor::row({std::nan("")});
  OptimizerState s;
  EXPECT_THROW(adam_step(p, s), NonFiniteError);
  EXPECT_EQ(p.at("a").value[0], 1.0);
  EXPECT_EQ(s.step, 0u);
}

TEST(Params, InitializationDeterministicAndBounded) {
  ParameterSet a(42), b(42);
  a.add_weight("w", 16, 8);
  b.add_weight("w", 16, 8);
  a.add_bias("b", 8);
  const double bound = 1.0 / std::sqrt(16.0);
  for (std::size_t i = 0; i < a.at("w").value.size(); ++i) {
    EXPECT_EQ(a.at("w").value[i], b.at("w").value[i]);
    EXPECT_LE(std::abs(a.at("w").value[i]), bound);
  }
  for (double v : a.at("b").value.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(a.add_bias("b", 2), Error);
}

TEST(Checkpoint, RoundTripIsExactAndByteStable) {
  ParameterSet p(8);
  p.add_weight("z.w", 3, 4);
  p.add_bias("a.b", 4);
  std::stringstream s1, s2;
  write_checkpoint(s1, p);
  write_checkpoint(s2, p);
  EXPECT_EQ(s1.str(), s2.str());
  EXPECT_EQ(s1.str().substr(0, 8), "SASRCKPT");
  ParameterSet q = read_checkpoint(s1);
  ASSERT_EQ(q.names(), p.names());
  for (const auto& n : p.names()) {
    EXPECT_EQ(q.at(n).value.shape(), p.at(n).value.shape());
    for (std::size_t i = 0; i < p.at(n).value.size(); ++i) EXPECT_EQ(q.at(n).value[i], p.at(n).value[i]);
  }
}

TEST(Checkpoint, CorruptHeaderThrows) {
  std::stringstream s("NOTACKPT........");
  EXPECT_THROW(read_checkpoint(s), Error);
}

TEST(Layers, AttentionWithCausalMaskIgnoresFuture) {
  ParameterSet p(6);
  init_attention(p, "att", 8);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Tensor x = Tensor::matrix(4, 8);
  for (double& v : x.values()) v = n(rng);
  const Tensor mask = causal_mask(4);
  auto run = [&](const Tensor& in) {
    Graph g(&p);
    Var xi = g.constant(in);
    return attention(g, xi, xi, "att", 2, &mask).value();
  };
  const Tensor a = run(x);
  Tensor x2 = x;
  for (std::size_t c = 0; c < 8; ++c) x2(3, c) += 1.0;
  const Tensor b = run(x2);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(a(r, c), b(r, c), 1e-12);
}

TEST(Determinism, IdenticalSeedsGiveBitIdenticalOutputs) {
  auto run = [] {
    ParameterSet p(77);
    init_transformer_block(p, "blk", {16, 32, 4});
    Graph g(&p);
    Tensor x = Tensor::matrix(5, 16);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (double& v : x.values()) v = n(rng);
    Var y = transformer_block(g, g.constant(x), "blk", {16, 32, 4});
    g.backward(sum(mul(y, y)));
    std::vector<double> out(y.value().values().begin(), y.value().values().end());
    for (const auto& [_, prm] : p.entries()) out.insert(out.end(), prm.grad.values().begin(), prm.grad.values().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace semiasr::nn
