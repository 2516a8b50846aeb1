// benchmarks/bench_core.cpp
#include <benchmark/benchmark.h>

#include <random>

#include "semiasr/corpus/logmel.hpp"
#include "semiasr/corpus/synth.hpp"
#include "semiasr/ctc/ctc.hpp"
#include "semiasr/ctc/model.hpp"
#include "semiasr/decode/beam.hpp"
#include "semiasr/eval/wer.hpp"
#include "semiasr/lm/ngram.hpp"
#include "semiasr/nn/graph.hpp"
#include "semiasr/util.hpp"

namespace {

using namespace semiasr;
using nn::Tensor;

Tensor log_probs(std::size_t t, std::size_t v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 2.0);
  Tensor out = Tensor::matrix(t, v);
  for (std::size_t r = 0; r < t; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < v; ++c) s += std::exp(out(r, c) = n(rng));
    for (std::size_t c = 0; c < v; ++c) out(r, c) -= std::log(s);
  }
  return out;
}

const corpus::SyntheticGrammar& grammar() {
  static const auto g = corpus::make_grammar({}, 1);
  return g;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = log_probs(n, n, 1), b = log_probs(n, n, 2);
  for (auto _ : state) {
    nn::Graph g;
    benchmark::DoNotOptimize(nn::matmul(g.constant(a), g.constant(b)).value());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256);

void BM_CtcLossAndGradient(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Tensor lp = log_probs(t, 12, 3);
  std::vector<int> target;
  for (std::size_t i = 0; i < t / 4; ++i) target.push_back(1 + static_cast<int>(i % 11));
  Tensor grad;
  for (auto _ : state) benchmark::DoNotOptimize(ctc::ctc_loss_value(lp, target, &grad));
}
BENCHMARK(BM_CtcLossAndGradient)->Arg(50)->Arg(200)->Arg(800);

void BM_FusedBeamSearch(benchmark::State& state) {
  const auto vocab = corpus::Vocabulary::letters(grammar().symbols());
  std::vector<std::vector<std::string>> text;
  for (const auto& s : corpus::generate_text(grammar(), 2, 500)) text.push_back(split_words(s));
  const auto lm = lm::NGramModel::train(text, lm::NGramConfig{});
  const Tensor lp = log_probs(60, vocab.size() + 1, 4);
  decode::FusionConfig f;
  f.alpha = 1.0;
  f.beta = 0.5;
  f.beam = static_cast<std::size_t>(state.range(0));
  f.nbest = f.beam;
  for (auto _ : state) benchmark::DoNotOptimize(decode::fused_beam_search(lp, vocab, &lm, f));
}
BENCHMARK(BM_FusedBeamSearch)->Arg(8)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_NGramSentenceScore(benchmark::State& state) {
  std::vector<std::vector<std::string>> text;
  for (const auto& s : corpus::generate_text(grammar(), 2, 2000)) text.push_back(split_words(s));
  const auto lm = lm::NGramModel::train(text, lm::NGramConfig{});
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(lm::lm_logprob(lm, text[i++ % text.size()]));
}
BENCHMARK(BM_NGramSentenceScore);

void BM_Wer(benchmark::State& state) {
  const auto refs = corpus::generate_text(grammar(), 5, 200);
  const auto hyps = corpus::generate_text(grammar(), 6, 200);
  for (auto _ : state) benchmark::DoNotOptimize(eval::corpus_wer(refs, hyps));
}
BENCHMARK(BM_Wer);

void BM_LogMel(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto samples = corpus::render(grammar(), "abc defg hij", rng);
  for (auto _ : state) benchmark::DoNotOptimize(corpus::logmel(samples));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples.size()));
}
BENCHMARK(BM_LogMel);

void BM_CtcEmissions(benchmark::State& state) {
  wav2vec::Wav2VecConfig c;
  c.encoder.layers = {{5, 10, 32}, {4, 8, 32}, {4, 8, 32}, {2, 4, 32}};
  c.context.blocks = 2;
  c.context.dim = 64;
  c.context.ffn_dim = 128;
  const ctc::CtcModel m(c, corpus::Vocabulary::letters(grammar().symbols()), 1);
  std::mt19937_64 rng(1);
  const auto samples = corpus::render(grammar(), "abc defg hij", rng);
  for (auto _ : state) benchmark::DoNotOptimize(m.emissions(samples));
}
BENCHMARK(BM_CtcEmissions)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
