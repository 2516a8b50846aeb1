// lm/neural.cpp
#include "semiasr/lm/neural.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "semiasr/error.hpp"
#include "semiasr/json_util.hpp"
#include "semiasr/nn/adam.hpp"
#include "semiasr/nn/checkpoint.hpp"
#include "semiasr/util.hpp"

namespace semiasr::lm {

using nn::Graph;
using nn::Tensor;
using nn::Var;

void NeuralLmConfig::validate() const {
  nn::validate(block());
  if (batch_size < 1) throw ConfigError("neural_lm.batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("neural_lm.learning_rate", "must be positive");
}

namespace {

std::vector<std::string> clean_words(std::vector<std::string> words) {
  std::set<std::string> s(words.begin(), words.end());
  s.erase(kUnk);
  s.erase(kEos);
  s.erase(kBos);
  return {s.begin(), s.end()};
}

}  // namespace

NeuralLm::NeuralLm(std::vector<std::string> words, const NeuralLmConfig& config)
    : config_(config), words_(clean_words(std::move(words))), params_(config.seed) {
  config_.validate();
  index();
  const std::size_t v_in = words_.size() + 3;
  params_.add_uniform("emb", {v_in, config_.dim}, 1.0);
  for (std::size_t b = 0; b < config_.blocks; ++b) nn::init_transformer_block(params_, "blk." + std::to_string(b), config_.block());
  nn::init_layer_norm(params_, "out_ln", config_.dim);
  nn::init_linear(params_, "out", config_.dim, outcome_count());
}

NeuralLm::NeuralLm(std::vector<std::string> words, const NeuralLmConfig& config, nn::ParameterSet params)
    : config_(config), words_(std::move(words)), params_(std::move(params)) {
  config_.validate();
  index();
  NeuralLm reference(words_, config_);
  for (const auto& [name, p] : reference.params_.entries()) {
    if (!params_.contains(name) || !params_.at(name).value.same_shape(p.value)) {
      throw ShapeError("neural LM: parameter '" + name + "' missing or of the wrong shape");
    }
  }
}

NeuralLm::NeuralLm(const NeuralLm& other)
    : config_(other.config_), words_(other.words_), ids_(other.ids_), params_(other.params_) {}

void NeuralLm::index() {
  ids_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) ids_[words_[i]] = static_cast<int>(i);
}

int NeuralLm::word_id(const std::string& word) const {
  if (word == kEos) return eos_id();
  auto it = ids_.find(word);
  return it == ids_.end() ? unk_id() : it->second;
}

Var NeuralLm::forward(Graph& g, const std::vector<int>& input) const {
  if (input.empty()) throw Error("neural LM: empty input");
  std::vector<std::size_t> rows(input.begin(), input.end());
  Var x = nn::gather_rows(g.param("emb"), rows);
  x = nn::add_const(x, nn::sinusoidal_positions(input.size(), config_.dim));
  const Tensor mask = nn::causal_mask(input.size());
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    x = nn::transformer_block(g, x, "blk." + std::to_string(b), config_.block(), &mask);
  }
  return nn::log_softmax_rows(nn::linear(g, nn::layer_norm(g, x, "out_ln"), "out"));
}

Var NeuralLm::sentence_loss(Graph& g, const std::vector<std::string>& words) const {
  std::vector<int> input{bos_id()};
  std::vector<std::size_t> target;
  for (const auto& w : words) {
    const int id = word_id(w);
    input.push_back(id);
    target.push_back(static_cast<std::size_t>(id));
  }
  target.push_back(static_cast<std::size_t>(eos_id()));
  Var logp = forward(g, input);
  return nn::scale(nn::mean(nn::pick(logp, target)), -1.0);
}

std::vector<double> NeuralLm::next_log_probs(const std::vector<int>& history) const {
  std::string key;
  for (int id : history) key += std::to_string(id) + ",";
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  std::vector<int> input{bos_id()};
  input.insert(input.end(), history.begin(), history.end());
  Graph g(const_cast<nn::ParameterSet*>(&params_));
  Var logp = forward(g, input);
  auto row = logp.value().row_span(input.size() - 1);
  std::vector<double> out(row.begin(), row.end());
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_.emplace(key, out);
  return out;
}

void NeuralLm::clear_cache() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_.clear();
}

double NeuralLm::score(const LmState& state, const std::string& word, LmState* next) const {
  const int id = word_id(word);
  const double lp = next_log_probs(state.history)[static_cast<std::size_t>(id)];
  if (next) {
    *next = state;
    next->history.push_back(id);
  }
  return lp;
}

double NeuralLm::end_score(const LmState& state) const {
  return next_log_probs(state.history)[static_cast<std::size_t>(eos_id())];
}

NeuralLm NeuralLm::train(const std::vector<std::vector<std::string>>& sentences, const NeuralLmConfig& config,
                         const std::function<void(std::size_t, double)>& on_epoch) {
  if (sentences.empty()) throw Error("neural_lm_train: empty corpus");
  std::vector<std::string> words;
  for (const auto& s : sentences) words.insert(words.end(), s.begin(), s.end());
  NeuralLm lm(std::move(words), config);
  nn::OptimizerState opt({config.learning_rate});
  std::mt19937_64 rng(derive_seed(config.seed, "neural-lm-order"));
  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Graph g(&lm.params_);
      std::vector<Var> losses;
      for (std::size_t i = start; i < end; ++i) losses.push_back(lm.sentence_loss(g, sentences[order[i]]));
      Var loss = nn::mean(nn::concat_rows(losses));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NonFiniteError("neural_lm", "non-finite loss at epoch " + std::to_string(epoch));
      }
      lm.params_.zero_grad();
      g.backward(loss);
      nn::clip_grad_norm(lm.params_, config.clip_norm);
      nn::adam_step(lm.params_, opt);
      loss_sum += value;
      ++batches;
    }
    if (on_epoch) on_epoch(epoch, loss_sum / static_cast<double>(batches));
  }
  lm.clear_cache();
  return lm;
}

void NeuralLm::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(path, params_);
  write_json_file(sidecar_path(path), {{"kind", "neural-lm"},
                                       {"words", words_},
                                       {"config",
                                        {{"blocks", config_.blocks},
                                         {"dim", config_.dim},
                                         {"ffn_dim", config_.ffn_dim},
                                         {"heads", config_.heads}}}});
}

NeuralLm NeuralLm::load(const std::filesystem::path& path) {
  const Json meta = read_json_file(sidecar_path(path));
  if (meta.value("kind", "") != "neural-lm") throw IoError(path.string() + ": not a neural LM checkpoint");
  NeuralLmConfig c;
  const Json& cj = meta.at("config");
  read_field(cj, "config", "blocks", c.blocks);
  read_field(cj, "config", "dim", c.dim);
  read_field(cj, "config", "ffn_dim", c.ffn_dim);
  read_field(cj, "config", "heads", c.heads);
  return NeuralLm(meta.at("words").get<std::vector<std::string>>(), c, nn::load_checkpoint(path));
}

}  // namespace semiasr::lm
