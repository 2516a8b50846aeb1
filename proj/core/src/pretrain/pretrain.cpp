// pretrain/pretrain.cpp
#include "semiasr/pretrain/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semiasr/error.hpp"
#include "semiasr/nn/adam.hpp"
#include "semiasr/util.hpp"

namespace semiasr::pretrain {

using nn::Graph;
using nn::Tensor;
using nn::Var;

void PretrainConfig::validate() const {
  if (diversity_weight < 0.0) throw ConfigError("pretrain.diversity_weight", "must be >= 0");
  if (!(similarity_temperature > 0.0)) throw ConfigError("pretrain.similarity_temperature", "must be positive");
  if (batch_size < 1) throw ConfigError("pretrain.batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("pretrain.learning_rate", "must be positive");
}

std::vector<std::size_t> sample_distractors(const wav2vec::MaskSet& mask, std::size_t t, std::size_t k,
                                            std::mt19937_64& rng) {
  if (t >= mask.covered.size() || !mask.covered[t]) {
    throw Error("sample_distractors: time step " + std::to_string(t) + " is not masked");
  }
  if (k == 0) return {};
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < mask.covered.size(); ++i)
    if (mask.covered[i] && i != t) candidates.push_back(i);
  if (candidates.empty()) throw Error("sample_distractors: no other masked time step to draw distractors from");
  std::vector<std::size_t> out;
  out.reserve(k);
  if (candidates.size() >= k) {
    // partial Fisher-Yates: first k of a uniform random permutation
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
      std::swap(candidates[i], candidates[pick(rng)]);
      out.push_back(candidates[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    for (std::size_t i = 0; i < k; ++i) out.push_back(candidates[pick(rng)]);
  }
  return out;
}

ContrastiveTerms contrastive_loss(Var context, Var targets, const std::vector<std::vector<std::size_t>>& distractors,
                                  double temperature) {
  const std::size_t m = context.rows();
  if (targets.rows() != m || distractors.size() != m) {
    throw ShapeError("contrastive_loss: " + std::to_string(m) + " context rows, " + std::to_string(targets.rows()) +
                     " targets, " + std::to_string(distractors.size()) + " distractor sets");
  }
  if (context.cols() != targets.cols()) {
    throw ShapeError("contrastive_loss: context dim " + std::to_string(context.cols()) + " != target dim " +
                     std::to_string(targets.cols()));
  }
  if (m == 0) throw Error("contrastive_loss: no masked positions");
  const std::size_t k = distractors.front().size();
  std::vector<std::size_t> cand;
  std::vector<std::size_t> rep;
  cand.reserve(m * (k + 1));
  rep.reserve(m * (k + 1));
  for (std::size_t i = 0; i < m; ++i) {
    if (distractors[i].size() != k) throw ShapeError("contrastive_loss: distractor sets differ in size");
    cand.push_back(i);
    rep.push_back(i);
    for (std::size_t d : distractors[i]) {
      if (d >= m) throw ShapeError("contrastive_loss: distractor index out of range");
      cand.push_back(d);
      rep.push_back(i);
    }
  }
  Var sims = nn::cosine_rows(nn::gather_rows(context, rep), nn::gather_rows(targets, cand));
  Var logits = nn::scale(nn::reshape(sims, m, k + 1), 1.0 / temperature);
  Var logp = nn::log_softmax_rows(logits);
  ContrastiveTerms out;
  out.per_position = nn::scale(nn::pick(logp, std::vector<std::size_t>(m, 0)), -1.0);

  const Tensor& s = sims.value();
  double correct = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = s.values().data() + i * (k + 1);
    const double best = *std::max_element(row, row + k + 1);
    if (row[0] < best) continue;
    const auto ties = std::count(row, row + k + 1, best);
    correct += 1.0 / static_cast<double>(ties);
  }
  out.accuracy = correct / static_cast<double>(m);
  return out;
}

double contrastive_loss_value(std::span<const double> context, std::span<const double> target,
                              const std::vector<std::vector<double>>& distractors, double temperature) {
  auto cosine = [&](std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < context.size(); ++i) {
      dot += context[i] * b[i];
      na += context[i] * context[i];
      nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error("contrastive_loss_value: zero-norm vector; cosine similarity undefined");
    return dot / std::sqrt(na * nb);
  };
  const double pos = cosine(target) / temperature;
  double denom = std::exp(pos);
  for (const auto& d : distractors) denom += std::exp(cosine(d) / temperature);
  return -(pos - std::log(denom));
}

double diversity_penalty(const std::vector<std::vector<double>>& distributions) {
  if (distributions.empty()) throw Error("diversity_penalty: no codebooks");
  double total = 0.0;
  for (const auto& p : distributions) {
    if (p.empty()) throw Error("diversity_penalty: empty distribution");
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-6) throw Error("diversity_penalty: distribution sums to " + std::to_string(s));
    if (p.size() == 1) continue;  // a single entry is always fully used
    double h = 0.0;
    for (double v : p)
      if (v > 0.0) h -= v * std::log(v);
    total += 1.0 - h / std::log(static_cast<double>(p.size()));
  }
  return total / static_cast<double>(distributions.size());
}

Var diversity_penalty(const std::vector<Var>& distributions) {
  if (distributions.empty()) throw Error("diversity_penalty: no codebooks");
  std::vector<Var> terms;
  for (Var p : distributions) {
    const std::size_t v = p.cols();
    if (v == 1) continue;
    Var neg_entropy = nn::sum(nn::mul(p, nn::log(p)));
    terms.push_back(nn::add_scalar(nn::scale(neg_entropy, 1.0 / std::log(static_cast<double>(v))), 1.0));
  }
  if (terms.empty()) return nn::scale(nn::sum(distributions.front()), 0.0);
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = nn::add(total, terms[i]);
  return nn::scale(total, 1.0 / static_cast<double>(distributions.size()));
}

namespace {

struct BatchTerms {
  Var loss;
  Var contrastive;
  Var diversity;
  double correct = 0.0;
  std::size_t positions = 0;
  bool empty = true;
};

BatchTerms build_batch(Graph& g, const wav2vec::Wav2VecModel& model,
                       const std::vector<const corpus::Utterance*>& batch, const PretrainConfig& config,
                       std::size_t epoch, std::uint64_t seed, wav2vec::QuantizeMode mode) {
  const auto& mcfg = model.config();
  const double tau = mcfg.quantizer.temperature(epoch);
  std::vector<Var> losses;
  std::vector<std::vector<Var>> probs(mcfg.quantizer.groups);
  BatchTerms out;
  for (const corpus::Utterance* u : batch) {
    std::mt19937_64 rng(derive_seed(seed, u->id + "#" + std::to_string(epoch)));
    Var z = model.encode_features(g, u->samples);
    const wav2vec::MaskSet mask = wav2vec::sample_masks(z.rows(), mcfg.mask, rng);
    const std::vector<std::size_t> masked = mask.indices();
    if (masked.empty() || (config.distractors > 0 && masked.size() < 2)) continue;  // rejected
    std::vector<std::size_t> row_of(mask.covered.size(), 0);
    for (std::size_t i = 0; i < masked.size(); ++i) row_of[masked[i]] = i;
    std::vector<std::vector<std::size_t>> distractors;
    distractors.reserve(masked.size());
    for (std::size_t t : masked) {
      auto d = sample_distractors(mask, t, config.distractors, rng);
      for (auto& i : d) i = row_of[i];
      distractors.push_back(std::move(d));
    }
    Var c = model.contextualize(g, z, &mask.covered);
    Var cp = nn::gather_rows(model.project_context(g, c), masked);
    auto q = model.quantize(g, nn::gather_rows(z, masked), mode, tau, &rng);
    auto terms = contrastive_loss(cp, q.q, distractors, config.similarity_temperature);
    losses.push_back(terms.per_position);
    for (std::size_t grp = 0; grp < probs.size(); ++grp) probs[grp].push_back(q.probs[grp]);
    out.correct += terms.accuracy * static_cast<double>(masked.size());
    out.positions += masked.size();
  }
  if (losses.empty()) return out;
  out.empty = false;
  out.contrastive = nn::mean(nn::concat_rows(losses));
  std::vector<Var> avg;
  for (auto& group : probs) avg.push_back(nn::mean_rows(nn::concat_rows(group)));
  out.diversity = diversity_penalty(avg);
  out.loss = config.diversity_weight == 0.0 ? out.contrastive
                                            : nn::add(out.contrastive, nn::scale(out.diversity, config.diversity_weight));
  return out;
}

}  // namespace

PretrainResult pretrain_run(const std::vector<const corpus::Utterance*>& utterances, wav2vec::Wav2VecModel& model,
                            const PretrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (utterances.empty()) throw Error("pretrain_run: no unlabeled utterances");
  nn::OptimizerState opt({config.learning_rate});
  std::mt19937_64 order_rng(derive_seed(config.seed, "pretrain-order"));
  std::vector<const corpus::Utterance*> order = utterances;
  PretrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0, div_sum = 0.0, correct = 0.0;
    std::size_t positions = 0, batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const corpus::Utterance*> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                  order.begin() + static_cast<std::ptrdiff_t>(end));
      Graph g(&model.params());
      BatchTerms terms = build_batch(g, model, batch, config, epoch, config.seed, wav2vec::QuantizeMode::kTrain);
      if (terms.empty) continue;
      const double loss = terms.loss.value().item();
      if (!std::isfinite(loss)) {
        throw NonFiniteError("pretrain", "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                             std::to_string(opt.step + 1));
      }
      model.params().zero_grad();
      g.backward(terms.loss);
      nn::clip_grad_norm(model.params(), config.clip_norm);
      nn::adam_step(model.params(), opt);
      loss_sum += loss;
      div_sum += terms.diversity.value().item();
      correct += terms.correct;
      positions += terms.positions;
      ++batches;
    }
    PretrainEpochMetrics m;
    m.epoch = epoch;
    if (batches > 0) {
      m.loss = loss_sum / static_cast<double>(batches);
      m.diversity = div_sum / static_cast<double>(batches);
      m.contrastive_accuracy = correct / static_cast<double>(positions);
    }
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

PretrainEpochMetrics evaluate_contrastive(const std::vector<const corpus::Utterance*>& utterances,
                                          const wav2vec::Wav2VecModel& model, const PretrainConfig& config,
                                          std::uint64_t seed, std::size_t epoch) {
  config.validate();
  double loss_sum = 0.0, div_sum = 0.0, correct = 0.0;
  std::size_t positions = 0, batches = 0;
  for (std::size_t start = 0; start < utterances.size(); start += config.batch_size) {
    const std::size_t end = std::min(utterances.size(), start + config.batch_size);
    std::vector<const corpus::Utterance*> batch(utterances.begin() + static_cast<std::ptrdiff_t>(start),
                                                utterances.begin() + static_cast<std::ptrdiff_t>(end));
    // gradients are never taken here, so binding the const parameters is safe
    Graph bound(const_cast<nn::ParameterSet*>(&model.params()));
    BatchTerms terms = build_batch(bound, model, batch, config, epoch, seed, wav2vec::QuantizeMode::kEval);
    if (terms.empty) continue;
    loss_sum += terms.loss.value().item();
    div_sum += terms.diversity.value().item();
    correct += terms.correct;
    positions += terms.positions;
    ++batches;
  }
  PretrainEpochMetrics m;
  m.epoch = epoch;
  if (batches > 0) {
    m.loss = loss_sum / static_cast<double>(batches);
    m.diversity = div_sum / static_cast<double>(batches);
    m.contrastive_accuracy = correct / static_cast<double>(positions);
  }
  return m;
}

}  // namespace semiasr::pretrain
