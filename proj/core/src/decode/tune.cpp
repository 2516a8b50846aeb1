// decode/tune.cpp
#include "semiasr/decode/tune.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "semiasr/error.hpp"
#include "semiasr/eval/wer.hpp"
#include "semiasr/util.hpp"

namespace semiasr::decode {

NBestList two_pass(const std::function<NBestList(const FusionConfig&)>& first_pass, const lm::LmScorer* lm2,
                   const TwoPassConfig& config) {
  NBestList list = nbest_prune(first_pass(config.fusion), config.fusion.nbest);
  if (lm2 && !list.hyps.empty()) list = rescore(list, *lm2, config.alpha2, config.beta2);
  return list;
}

void TuneConfig::validate() const {
  if (trials < 1) throw ConfigError("tune.trials", "must be >= 1");
  if (!(alpha_min <= alpha_max)) throw ConfigError("tune.alpha_range", "min must not exceed max");
  if (!(beta_min <= beta_max)) throw ConfigError("tune.beta_range", "min must not exceed max");
  fusion.validate();
}

std::vector<TrialWeights> sample_trials(const TuneConfig& config, std::size_t count) {
  std::mt19937_64 rng(derive_seed(config.seed, "tune"));
  std::uniform_real_distribution<double> a(config.alpha_min, config.alpha_max);
  std::uniform_real_distribution<double> b(config.beta_min, config.beta_max);
  std::vector<TrialWeights> out(count);
  for (auto& w : out) {
    w.alpha = a(rng);
    w.beta = b(rng);
    w.alpha2 = a(rng);
    w.beta2 = b(rng);
  }
  return out;
}

TwoPassConfig TuneResult::decode_config(const FusionConfig& base) const {
  TwoPassConfig c;
  c.fusion = base;
  c.fusion.alpha = best.weights.alpha;
  c.fusion.beta = best.weights.beta;
  c.alpha2 = best.weights.alpha2;
  c.beta2 = best.weights.beta2;
  return c;
}

TuneResult tune_random_search(const std::vector<std::string>& references, const FirstPassFn& first_pass,
                              const lm::LmScorer* lm2, const TuneConfig& config) {
  config.validate();
  if (references.empty()) throw Error("tune_random_search: empty dev set");
  TuneResult result;
  const auto weights = sample_trials(config, config.trials);
  for (std::size_t t = 0; t < weights.size(); ++t) {
    TwoPassConfig c;
    c.fusion = config.fusion;
    c.fusion.alpha = weights[t].alpha;
    c.fusion.beta = weights[t].beta;
    c.alpha2 = weights[t].alpha2;
    c.beta2 = weights[t].beta2;
    std::vector<std::string> hyps;
    hyps.reserve(references.size());
    for (std::size_t i = 0; i < references.size(); ++i) {
      const NBestList list = two_pass([&](const FusionConfig& f) { return first_pass(i, f); }, lm2, c);
      hyps.push_back(list.hyps.empty() ? std::string() : list.best().text);
    }
    TrialResult r;
    r.trial = t + 1;
    r.weights = weights[t];
    r.rescored = lm2 != nullptr;
    r.dev_wer = eval::corpus_wer(references, hyps).wer();
    if (t == 0 || r.dev_wer < result.best.dev_wer) result.best = r;
    result.table.push_back(r);
  }
  return result;
}

TuneResult tune_random_search(const std::vector<std::string>& references, const std::vector<nn::Tensor>& emissions,
                              const corpus::Vocabulary& vocab, const lm::LmScorer* lm, const lm::LmScorer* lm2,
                              const TuneConfig& config) {
  if (emissions.size() != references.size()) {
    throw Error("tune_random_search: " + std::to_string(emissions.size()) + " emission matrices for " +
                std::to_string(references.size()) + " references");
  }
  return tune_random_search(
      references, [&](std::size_t i, const FusionConfig& f) { return fused_beam_search(emissions[i], vocab, lm, f); },
      lm2, config);
}

void write_tune_csv(const std::filesystem::path& path, const TuneResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "trial,alpha,beta,alpha2,beta2,dev_wer\n";
  for (const auto& r : result.table) {
    out << r.trial << ',' << r.weights.alpha << ',' << r.weights.beta << ',';
    if (r.rescored) out << r.weights.alpha2 << ',' << r.weights.beta2;
    else out << ',';
    out << ',' << r.dev_wer << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace semiasr::decode
