// semiasr/selftrain/config.hpp
//
// Pipeline configuration tree. The on-disk form is JSON; every section is
// optional and unknown fields are rejected with their dotted path.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semiasr/corpus/split.hpp"
#include "semiasr/corpus/synth.hpp"
#include "semiasr/ctc/model.hpp"
#include "semiasr/decode/tune.hpp"
#include "semiasr/json_util.hpp"
#include "semiasr/lm/neural.hpp"
#include "semiasr/lm/ngram.hpp"
#include "semiasr/pretrain/pretrain.hpp"
#include "semiasr/seq2seq/model.hpp"
#include "semiasr/wav2vec/model.hpp"

namespace semiasr::selftrain {

enum class Variant { kS2SScratch, kCtcFt };
/// Starting point of the ctc-ft final model.
enum class CtcInit { kPretrained, kFinetuned };
/// The four arms of the 2x2 ablation grid.
enum class Arm { kSupervised, kPretrainOnly, kSelfTrainOnly, kCombined };

std::string_view to_string(Variant v);
std::string_view to_string(CtcInit c);
std::string_view to_string(Arm a);
Variant parse_variant(std::string_view s);
CtcInit parse_ctc_init(std::string_view s);
Arm parse_arm(std::string_view s);
Arm arm_from_flags(bool no_pretrain, bool no_selftrain);
bool uses_pretraining(Arm a);
bool uses_selftraining(Arm a);

struct CorpusConfig {
  corpus::GrammarOptions grammar;
  std::uint64_t grammar_seed = 1;
  /// Seed of the utterance pool and the split; the data stay fixed across master seeds.
  std::uint64_t corpus_seed = 7;
  corpus::SplitRequest split;
  /// Sentences of LM training text drawn from the grammar.
  std::size_t lm_sentences = 2000;
};

struct LmStageConfig {
  lm::NGramConfig ngram;
  lm::NeuralLmConfig neural;
  /// Second-pass rescoring with the neural LM.
  bool rescore = true;
};

struct DecodeStageConfig {
  decode::FusionConfig fusion;
  std::size_t pseudo_label_beam = 200;
  decode::TuneConfig tune;
};

struct FinalConfig {
  Variant variant = Variant::kCtcFt;
  CtcInit ctc_init = CtcInit::kPretrained;
  ctc::FinetuneConfig finetune;
  seq2seq::S2SConfig s2s;
  seq2seq::S2STrainConfig s2s_train;
  std::size_t word_pieces = 64;
};

struct PipelineConfig {
  CorpusConfig corpus;
  wav2vec::Wav2VecConfig wav2vec;
  pretrain::PretrainConfig pretrain;
  ctc::FinetuneConfig finetune;
  LmStageConfig lm;
  DecodeStageConfig decode;
  FinalConfig final_model;
  std::vector<Arm> arms{Arm::kSupervised, Arm::kPretrainOnly, Arm::kSelfTrainOnly, Arm::kCombined};
  std::optional<std::uint64_t> seed;

  void validate() const;
};

/// Parses and validates. An "ablation" object {"no_pretrain","no_selftrain"}
/// selects the single matching arm and may not be combined with "arms".
PipelineConfig pipeline_config_from_json(const Json& j);
Json to_json(const PipelineConfig& config);

/// Sets `dotted` (e.g. "finetune.epochs") in `root`. The value is parsed as JSON
/// when possible and taken as a string otherwise. Intermediate objects are created.
void set_dotted(Json& root, const std::string& dotted, const std::string& value);

// Section readers, shared with the command-line tool.
corpus::GrammarOptions grammar_options_from_json(const Json& j, const std::string& path);
Json to_json(const corpus::GrammarOptions& g);
pretrain::PretrainConfig pretrain_config_from_json(const Json& j, const std::string& path);
Json to_json(const pretrain::PretrainConfig& c);
ctc::FinetuneConfig finetune_config_from_json(const Json& j, const std::string& path);
Json to_json(const ctc::FinetuneConfig& c);
lm::NGramConfig ngram_config_from_json(const Json& j, const std::string& path);
Json to_json(const lm::NGramConfig& c);
lm::NeuralLmConfig neural_lm_config_from_json(const Json& j, const std::string& path);
Json to_json(const lm::NeuralLmConfig& c);
decode::FusionConfig fusion_config_from_json(const Json& j, const std::string& path);
Json to_json(const decode::FusionConfig& c);
decode::TuneConfig tune_config_from_json(const Json& j, const std::string& path);
Json to_json(const decode::TuneConfig& c);
seq2seq::S2STrainConfig s2s_train_config_from_json(const Json& j, const std::string& path);
Json to_json(const seq2seq::S2STrainConfig& c);

}  // namespace semiasr::selftrain
