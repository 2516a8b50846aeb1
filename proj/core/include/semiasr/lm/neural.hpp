// semiasr/lm/neural.hpp
//
// Word-level causal transformer LM: token embeddings plus sinusoidal positions,
// pre-LN transformer blocks under a causal mask, and a softmax over
// words + "<unk>" + "</s>". The input side additionally embeds "<s>".
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "semiasr/lm/scorer.hpp"
#include "semiasr/nn/graph.hpp"
#include "semiasr/nn/layers.hpp"
#include "semiasr/nn/params.hpp"

namespace semiasr::lm {

struct NeuralLmConfig {
  std::size_t blocks = 2;
  std::size_t dim = 64;
  std::size_t ffn_dim = 128;
  std::size_t heads = 4;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
  nn::TransformerBlockConfig block() const { return {dim, ffn_dim, heads}; }
};

class NeuralLm final : public LmScorer {
 public:
  /// Untrained model over the given words (duplicates and special tokens are dropped).
  NeuralLm(std::vector<std::string> words, const NeuralLmConfig& config);
  NeuralLm(const NeuralLm& other);

  /// Next-token cross-entropy training; deterministic given `config.seed`.
  /// `on_epoch` receives (epoch, mean per-token loss).
  static NeuralLm train(const std::vector<std::vector<std::string>>& sentences, const NeuralLmConfig& config,
                        const std::function<void(std::size_t, double)>& on_epoch = {});

  std::string tag() const override { return "neural"; }
  double score(const LmState& state, const std::string& word, LmState* next) const override;
  double end_score(const LmState& state) const override;
  std::size_t outcome_count() const override { return words_.size() + 2; }

  const NeuralLmConfig& config() const { return config_; }
  const std::vector<std::string>& vocabulary() const { return words_; }
  nn::ParameterSet& params() { return params_; }
  int word_id(const std::string& word) const;
  int unk_id() const { return static_cast<int>(words_.size()); }
  int eos_id() const { return static_cast<int>(words_.size()) + 1; }
  int bos_id() const { return static_cast<int>(words_.size()) + 2; }

  /// [L, V+2] next-outcome log-probabilities for inputs "<s>" w_1 .. w_{L-1}.
  nn::Var forward(nn::Graph& g, const std::vector<int>& input) const;
  /// Mean per-token loss of one sentence (targets include the sentence end).
  nn::Var sentence_loss(nn::Graph& g, const std::vector<std::string>& words) const;
  /// Next-outcome distribution after `history` (word ids).
  std::vector<double> next_log_probs(const std::vector<int>& history) const;
  void clear_cache() const;

  void save(const std::filesystem::path& path) const;
  static NeuralLm load(const std::filesystem::path& path);

 private:
  NeuralLm(std::vector<std::string> words, const NeuralLmConfig& config, nn::ParameterSet params);
  void index();

  NeuralLmConfig config_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
  nn::ParameterSet params_;
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

}  // namespace semiasr::lm
