// grad_suite.cpp
#include "semiasr/grad_suite.hpp"

#include <chrono>
#include <random>

#include "semiasr/corpus/vocab.hpp"
#include "semiasr/ctc/ctc.hpp"
#include "semiasr/ctc/model.hpp"
#include "semiasr/lm/neural.hpp"
#include "semiasr/nn/layers.hpp"
#include "semiasr/pretrain/pretrain.hpp"
#include "semiasr/seq2seq/model.hpp"
#include "semiasr/util.hpp"
#include "semiasr/wav2vec/model.hpp"

namespace semiasr {

using nn::Graph;
using nn::ParameterSet;
using nn::Tensor;
using nn::Var;

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = u(rng);
  return t;
}

/// Entries bounded away from zero, for ops with a kink there.
Tensor off_zero(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Tensor t = random_tensor(rows, cols, rng);
  for (double& v : t.values()) v += v < 0.0 ? -0.1 : 0.1;
  return t;
}

/// Weighted sum with fixed random weights, so every output entry gets a distinct gradient.
Var project(Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return nn::sum(nn::mul(out, out.graph->constant(random_tensor(out.rows(), out.cols(), rng))));
}

struct Case {
  std::string name;
  std::function<GradSuiteEntry(double)> run;
};

using LossFn = std::function<Var(Graph&)>;

GradSuiteEntry check(const std::string& name, ParameterSet& params, const LossFn& fn, double tolerance,
                     std::size_t max_entries = 0) {
  nn::GradCheckOptions opt;
  opt.max_entries_per_param = max_entries;
  opt.seed = 11;
  GradSuiteEntry e;
  e.name = name;
  e.result = nn::grad_check(fn, params, opt);
  e.passed = e.result.max_relative_error <= tolerance;
  return e;
}

/// An op case over freshly drawn parameters a (ra x ca) and b (rb x cb).
Case op_case(const std::string& name, std::size_t ra, std::size_t ca, std::size_t rb, std::size_t cb,
             std::function<Var(Graph&, Var, Var)> op, bool avoid_zero = false) {
  return {name, [=](double tol) {
            std::mt19937_64 rng(fnv1a64(name));
            ParameterSet p;
            p.add("a", avoid_zero ? off_zero(ra, ca, rng) : random_tensor(ra, ca, rng));
            p.add("b", avoid_zero ? off_zero(rb, cb, rng) : random_tensor(rb, cb, rng));
            return check("op/" + name, p,
                         [&](Graph& g) { return project(op(g, g.param("a"), g.param("b")), 3); }, tol);
          }};
}

std::vector<Case> cases() {
  std::vector<Case> c;
  c.push_back(op_case("matmul", 3, 4, 4, 2, [](Graph&, Var a, Var b) { return nn::matmul(a, b); }));
  c.push_back(op_case("matmul_nt", 3, 4, 2, 4, [](Graph&, Var a, Var b) { return nn::matmul_nt(a, b); }));
  c.push_back(op_case("transpose", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::transpose(a); }));
  c.push_back(op_case("add", 3, 4, 3, 4, [](Graph&, Var a, Var b) { return nn::add(a, b); }));
  c.push_back(op_case("sub", 3, 4, 3, 4, [](Graph&, Var a, Var b) { return nn::sub(a, b); }));
  c.push_back(op_case("mul", 3, 4, 3, 4, [](Graph&, Var a, Var b) { return nn::mul(a, b); }));
  c.push_back(op_case("add_row", 3, 4, 1, 4, [](Graph&, Var a, Var b) { return nn::add_row(a, b); }));
  c.push_back(op_case("mul_row", 3, 4, 1, 4, [](Graph&, Var a, Var b) { return nn::mul_row(a, b); }));
  c.push_back(op_case("add_const", 3, 4, 1, 1, [](Graph&, Var a, Var) {
    return nn::add_const(a, Tensor::matrix(3, 4, 0.25));
  }));
  c.push_back(op_case("scale", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::scale(a, -1.7); }));
  c.push_back(op_case("add_scalar", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::add_scalar(a, 0.3); }));
  c.push_back(op_case("relu", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::relu(a); }, true));
  c.push_back(op_case("gelu", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::gelu(a); }));
  c.push_back(op_case("tanh", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::tanh(a); }));
  c.push_back(op_case("exp", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::exp(a); }));
  c.push_back(op_case("log", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::log(nn::add_scalar(nn::mul(a, a), 0.5)); }));
  c.push_back(op_case("softmax_rows", 3, 5, 1, 1, [](Graph&, Var a, Var) { return nn::softmax_rows(a); }));
  c.push_back(op_case("log_softmax_rows", 3, 5, 1, 1, [](Graph&, Var a, Var) { return nn::log_softmax_rows(a); }));
  c.push_back(op_case("layer_norm_rows", 3, 5, 2, 5, [](Graph&, Var a, Var b) {
    return nn::layer_norm_rows(a, nn::slice_rows(b, 0, 1), nn::slice_rows(b, 1, 2));
  }));
  c.push_back(op_case("conv1d", 9, 2, 7, 3, [](Graph&, Var a, Var b) {
    // kernel 3 over 2 input channels -> 6 weight rows; the last row of b is the bias
    return nn::conv1d(a, nn::slice_rows(b, 0, 6), nn::slice_rows(b, 6, 7), 3, 2);
  }));
  c.push_back(op_case("concat_cols", 3, 2, 3, 4, [](Graph&, Var a, Var b) { return nn::concat_cols({a, b, a}); }));
  c.push_back(op_case("concat_rows", 2, 4, 3, 4, [](Graph&, Var a, Var b) { return nn::concat_rows({a, b, a}); }));
  c.push_back(op_case("slice_cols", 3, 5, 1, 1, [](Graph&, Var a, Var) { return nn::slice_cols(a, 1, 4); }));
  c.push_back(op_case("slice_rows", 5, 3, 1, 1, [](Graph&, Var a, Var) { return nn::slice_rows(a, 1, 4); }));
  c.push_back(op_case("gather_rows", 4, 3, 1, 1, [](Graph&, Var a, Var) { return nn::gather_rows(a, {2, 0, 2, 3}); }));
  c.push_back(op_case("reshape", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::reshape(a, 2, 6); }));
  c.push_back(op_case("sum", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::sum(nn::mul(a, a)); }));
  c.push_back(op_case("mean", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::mean(nn::mul(a, a)); }));
  c.push_back(op_case("sum_rows", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::sum_rows(a); }));
  c.push_back(op_case("mean_rows", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::mean_rows(a); }));
  c.push_back(op_case("sum_cols", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::sum_cols(a); }));
  c.push_back(op_case("cosine_rows", 3, 4, 3, 4, [](Graph&, Var a, Var b) { return nn::cosine_rows(a, b); }));
  c.push_back(op_case("pick", 3, 4, 1, 1, [](Graph&, Var a, Var) { return nn::pick(a, {1, 3, 0}); }));
  c.push_back(op_case("replace_rows", 4, 3, 1, 3, [](Graph&, Var a, Var b) {
    return nn::replace_rows(a, {false, true, true, false}, b);
  }));
  c.push_back(op_case("ctc_loss", 6, 4, 1, 1, [](Graph&, Var a, Var) {
    return ctc::ctc_loss(nn::log_softmax_rows(a), {1, 2, 2});
  }));

  c.push_back({"attention", [](double tol) {
                 ParameterSet p(5);
                 nn::init_attention(p, "att", 8);
                 std::mt19937_64 rng(6);
                 p.add("x", random_tensor(4, 8, rng));
                 p.add("m", random_tensor(3, 8, rng));
                 const Tensor mask = nn::causal_mask(4);
                 return check("layer/attention", p, [&](Graph& g) {
                   Var self = nn::attention(g, g.param("x"), g.param("x"), "att", 2, &mask);
                   return project(nn::add(self, nn::attention(g, g.param("x"), g.param("m"), "att", 2)), 7);
                 }, tol);
               }});
  c.push_back({"transformer_block", [](double tol) {
                 ParameterSet p(8);
                 const nn::TransformerBlockConfig cfg{8, 12, 2};
                 nn::init_transformer_block(p, "blk", cfg, true);
                 std::mt19937_64 rng(9);
                 p.add("x", random_tensor(4, 8, rng));
                 p.add("m", random_tensor(3, 8, rng));
                 const Tensor mask = nn::causal_mask(4);
                 return check("layer/transformer_block", p, [&](Graph& g) {
                   return project(nn::transformer_block(g, g.param("x"), "blk", cfg, &mask, g.param("m")), 10);
                 }, tol);
               }});

  c.push_back({"wav2vec", [](double tol) {
                 wav2vec::Wav2VecConfig cfg;
                 cfg.encoder.layers = {{3, 4, 4}, {2, 3, 4}};
                 cfg.context.blocks = 1;
                 cfg.context.dim = 8;
                 cfg.context.ffn_dim = 8;
                 cfg.context.heads = 2;
                 cfg.context.positional_kernel = 3;
                 cfg.quantizer.groups = 2;
                 cfg.quantizer.entries = 3;
                 cfg.quantizer.codeword_dim = 3;
                 wav2vec::Wav2VecModel m(cfg, 3);
                 std::mt19937_64 rng(1);
                 std::normal_distribution<float> n(0.0f, 1.0f);
                 std::vector<float> x(120);
                 for (auto& v : x) v = n(rng);
                 const std::vector<std::size_t> idx = {2, 3, 5, 8};
                 return check("model/wav2vec", m.params(), [&](Graph& g) {
                   Var z = m.encode_features(g, x);
                   std::vector<bool> covered(z.rows(), false);
                   for (auto i : idx) covered[i] = true;
                   Var ctx = nn::gather_rows(m.project_context(g, m.contextualize(g, z, &covered)), idx);
                   auto q = m.quantize(g, nn::gather_rows(z, idx), wav2vec::QuantizeMode::kEval, 2.0, nullptr);
                   auto terms = pretrain::contrastive_loss(ctx, q.q, {{1, 2}, {0, 3}, {3, 1}, {0, 2}}, 0.5);
                   std::vector<Var> avg;
                   for (auto& pr : q.probs) avg.push_back(nn::mean_rows(pr));
                   return nn::add(nn::mean(terms.per_position), nn::scale(pretrain::diversity_penalty(avg), 0.1));
                 }, tol);
               }});
  c.push_back({"ctc_model", [](double tol) {
                 wav2vec::Wav2VecConfig cfg;
                 cfg.encoder.layers = {{3, 4, 4}, {2, 3, 4}};
                 cfg.context.blocks = 1;
                 cfg.context.dim = 8;
                 cfg.context.ffn_dim = 8;
                 cfg.context.heads = 2;
                 cfg.context.positional_kernel = 3;
                 ctc::CtcModel m(cfg, corpus::Vocabulary::letters("ab "), 4);
                 std::mt19937_64 rng(2);
                 std::normal_distribution<float> n(0.0f, 1.0f);
                 std::vector<float> x(120);
                 for (auto& v : x) v = n(rng);
                 return check("model/ctc", m.params(), [&](Graph& g) {
                   return ctc::ctc_loss(m.log_probs(g, x), ctc::to_columns(m.vocab().encode("ab a")));
                 }, tol);
               }});
  c.push_back({"seq2seq", [](double tol) {
                 seq2seq::S2SConfig cfg;
                 cfg.features.bins = 8;
                 cfg.frontend_layers = 2;
                 cfg.frontend_strides = {2, 1};
                 cfg.encoder_blocks = 1;
                 cfg.decoder_blocks = 1;
                 cfg.dim = 8;
                 cfg.ffn_dim = 12;
                 cfg.heads = 2;
                 seq2seq::S2SModel m(cfg, corpus::Vocabulary::letters("ab "), 6);
                 std::mt19937_64 rng(3);
                 const Tensor feats = random_tensor(9, 8, rng);
                 return check("model/seq2seq", m.params(), [&](Graph& g) {
                   return m.loss(g, feats, {0, 1, 2, 1}, 0.1);
                 }, tol);
               }});
  c.push_back({"neural_lm", [](double tol) {
                 lm::NeuralLmConfig cfg;
                 cfg.blocks = 1;
                 cfg.dim = 8;
                 cfg.ffn_dim = 12;
                 cfg.heads = 2;
                 lm::NeuralLm m({"aa", "ab", "ba"}, cfg);
                 return check("model/neural_lm", m.params(), [&](Graph& g) {
                   return m.sentence_loss(g, {"ab", "ba", "aa", "zz"});
                 }, tol);
               }});
  return c;
}

}  // namespace

std::vector<std::string> gradient_suite_names() {
  std::vector<std::string> out;
  for (const auto& c : cases()) out.push_back(c.name);
  return out;
}

std::vector<GradSuiteEntry> run_gradient_suite(double tolerance, const std::string& filter,
                                               const std::function<void(const GradSuiteEntry&)>& on_entry) {
  std::vector<GradSuiteEntry> out;
  for (const auto& c : cases()) {
    if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
    const auto t0 = std::chrono::steady_clock::now();
    GradSuiteEntry e = c.run(tolerance);
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_entry) on_entry(e);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace semiasr
