// selftrain/config.cpp
#include "semiasr/selftrain/config.hpp"

#include <set>

#include "semiasr/error.hpp"
#include "semiasr/wav2vec/config_io.hpp"

namespace semiasr::selftrain {

std::string_view to_string(Variant v) { return v == Variant::kCtcFt ? "ctc-ft" : "s2s-scratch"; }
std::string_view to_string(CtcInit c) { return c == CtcInit::kPretrained ? "pretrained" : "finetuned"; }

std::string_view to_string(Arm a) {
  switch (a) {
    case Arm::kSupervised: return "supervised";
    case Arm::kPretrainOnly: return "pretrain";
    case Arm::kSelfTrainOnly: return "selftrain";
    case Arm::kCombined: return "combined";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "ctc-ft") return Variant::kCtcFt;
  if (s == "s2s-scratch") return Variant::kS2SScratch;
  throw ConfigError("final.variant", "expected \"ctc-ft\" or \"s2s-scratch\", got \"" + std::string(s) + "\"");
}

CtcInit parse_ctc_init(std::string_view s) {
  if (s == "pretrained") return CtcInit::kPretrained;
  if (s == "finetuned") return CtcInit::kFinetuned;
  throw ConfigError("final.ctc_init", "expected \"pretrained\" or \"finetuned\", got \"" + std::string(s) + "\"");
}

Arm parse_arm(std::string_view s) {
  for (Arm a : {Arm::kSupervised, Arm::kPretrainOnly, Arm::kSelfTrainOnly, Arm::kCombined})
    if (to_string(a) == s) return a;
  throw ConfigError("arms", "unknown arm \"" + std::string(s) + "\"");
}

Arm arm_from_flags(bool no_pretrain, bool no_selftrain) {
  if (no_pretrain) return no_selftrain ? Arm::kSupervised : Arm::kSelfTrainOnly;
  return no_selftrain ? Arm::kPretrainOnly : Arm::kCombined;
}

bool uses_pretraining(Arm a) { return a == Arm::kPretrainOnly || a == Arm::kCombined; }
bool uses_selftraining(Arm a) { return a == Arm::kSelfTrainOnly || a == Arm::kCombined; }

namespace {

wav2vec::Wav2VecConfig desk_wav2vec() {
  wav2vec::Wav2VecConfig c;
  c.encoder.layers = {{5, 10, 32}, {4, 8, 32}, {4, 8, 32}, {2, 4, 32}};
  c.context.blocks = 2;
  c.context.dim = 64;
  c.context.ffn_dim = 128;
  c.context.heads = 4;
  c.quantizer.entries = 32;
  c.quantizer.codeword_dim = 16;
  c.quantizer.logit_init_scale = 10.0;
  c.mask.span = 4;
  c.mask.start_prob = 0.1;
  return c;
}

Json split_to_json(const corpus::SplitRequest& s) {
  return {{"labeled", s.labeled}, {"ratio", s.ratio}, {"dev", s.dev}, {"test", s.test}};
}

corpus::SplitRequest split_from_json(const Json& j, const std::string& path) {
  corpus::SplitRequest s;
  require_keys(j, path, {"labeled", "ratio", "dev", "test"});
  read_field(j, path, "labeled", s.labeled);
  read_field(j, path, "ratio", s.ratio);
  read_field(j, path, "dev", s.dev);
  read_field(j, path, "test", s.test);
  if (s.labeled < 1) throw ConfigError(path + ".labeled", "must be >= 1");
  if (!(s.ratio >= 0.0)) throw ConfigError(path + ".ratio", "must be >= 0");
  if (s.dev < 1) throw ConfigError(path + ".dev", "must be >= 1");
  if (s.test < 1) throw ConfigError(path + ".test", "must be >= 1");
  return s;
}

}  // namespace

corpus::GrammarOptions grammar_options_from_json(const Json& j, const std::string& path) {
  corpus::GrammarOptions g;
  require_keys(j, path, {"letters", "lexicon_size", "min_word_length", "max_word_length", "successors", "low_hz",
                         "step_hz", "separator_hz", "duration_ms", "min_words", "max_words", "noise_sigma",
                         "amplitude", "pitch_jitter", "amplitude_jitter"});
  read_field(j, path, "letters", g.letters);
  read_field(j, path, "lexicon_size", g.lexicon_size);
  read_field(j, path, "min_word_length", g.min_word_length);
  read_field(j, path, "max_word_length", g.max_word_length);
  read_field(j, path, "successors", g.successors);
  read_field(j, path, "low_hz", g.low_hz);
  read_field(j, path, "step_hz", g.step_hz);
  read_field(j, path, "separator_hz", g.separator_hz);
  read_field(j, path, "duration_ms", g.duration_ms);
  read_field(j, path, "min_words", g.min_words);
  read_field(j, path, "max_words", g.max_words);
  read_field(j, path, "noise_sigma", g.noise_sigma);
  read_field(j, path, "amplitude", g.amplitude);
  read_field(j, path, "pitch_jitter", g.pitch_jitter);
  read_field(j, path, "amplitude_jitter", g.amplitude_jitter);
  return g;
}

Json to_json(const corpus::GrammarOptions& g) {
  return {{"letters", g.letters},       {"lexicon_size", g.lexicon_size}, {"min_word_length", g.min_word_length},
          {"max_word_length", g.max_word_length}, {"successors", g.successors}, {"low_hz", g.low_hz},
          {"step_hz", g.step_hz},       {"separator_hz", g.separator_hz}, {"duration_ms", g.duration_ms},
          {"min_words", g.min_words},   {"max_words", g.max_words},     {"noise_sigma", g.noise_sigma},
          {"amplitude", g.amplitude},   {"pitch_jitter", g.pitch_jitter}, {"amplitude_jitter", g.amplitude_jitter}};
}

pretrain::PretrainConfig pretrain_config_from_json(const Json& j, const std::string& path) {
  pretrain::PretrainConfig c;
  c.distractors = 10;
  c.similarity_temperature = 0.1;
  c.learning_rate = 1e-3;
  c.epochs = 8;
  require_keys(j, path, {"distractors", "diversity_weight", "similarity_temperature", "epochs", "batch_size",
                         "learning_rate", "clip_norm"});
  read_field(j, path, "distractors", c.distractors);
  read_field(j, path, "diversity_weight", c.diversity_weight);
  read_field(j, path, "similarity_temperature", c.similarity_temperature);
  read_field(j, path, "epochs", c.epochs);
  read_field(j, path, "batch_size", c.batch_size);
  read_field(j, path, "learning_rate", c.learning_rate);
  read_field(j, path, "clip_norm", c.clip_norm);
  c.validate();
  return c;
}

Json to_json(const pretrain::PretrainConfig& c) {
  return {{"distractors", c.distractors},   {"diversity_weight", c.diversity_weight},
          {"similarity_temperature", c.similarity_temperature}, {"epochs", c.epochs},
          {"batch_size", c.batch_size},     {"learning_rate", c.learning_rate}, {"clip_norm", c.clip_norm}};
}

ctc::FinetuneConfig finetune_config_from_json(const Json& j, const std::string& path) {
  ctc::FinetuneConfig c;
  c.learning_rate = 1e-3;
  c.epochs = 40;
  require_keys(j, path, {"epochs", "batch_size", "learning_rate", "final_lr_scale", "clip_norm",
                         "freeze_encoder_epochs", "mask", "mask_prob_scale"});
  read_field(j, path, "epochs", c.epochs);
  read_field(j, path, "batch_size", c.batch_size);
  read_field(j, path, "learning_rate", c.learning_rate);
  read_field(j, path, "final_lr_scale", c.final_lr_scale);
  read_field(j, path, "clip_norm", c.clip_norm);
  read_field(j, path, "freeze_encoder_epochs", c.freeze_encoder_epochs);
  read_field(j, path, "mask", c.mask);
  read_field(j, path, "mask_prob_scale", c.mask_prob_scale);
  c.validate();
  return c;
}

Json to_json(const ctc::FinetuneConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"final_lr_scale", c.final_lr_scale},
          {"clip_norm", c.clip_norm},
          {"freeze_encoder_epochs", c.freeze_encoder_epochs},
          {"mask", c.mask},
          {"mask_prob_scale", c.mask_prob_scale}};
}

lm::NGramConfig ngram_config_from_json(const Json& j, const std::string& path) {
  lm::NGramConfig c;
  require_keys(j, path, {"order", "smoothing", "k", "backoff", "sentence_end"});
  read_field(j, path, "order", c.order);
  std::string smoothing = lm::to_string(c.smoothing);
  read_field(j, path, "smoothing", smoothing);
  try {
    c.smoothing = lm::parse_smoothing(smoothing);
  } catch (const Error& e) {
    throw ConfigError(path + ".smoothing", e.what());
  }
  read_field(j, path, "k", c.k);
  read_field(j, path, "backoff", c.backoff);
  read_field(j, path, "sentence_end", c.sentence_end);
  c.validate();
  return c;
}

Json to_json(const lm::NGramConfig& c) {
  return {{"order", c.order}, {"smoothing", lm::to_string(c.smoothing)}, {"k", c.k}, {"backoff", c.backoff},
          {"sentence_end", c.sentence_end}};
}

lm::NeuralLmConfig neural_lm_config_from_json(const Json& j, const std::string& path) {
  lm::NeuralLmConfig c;
  require_keys(j, path, {"blocks", "dim", "ffn_dim", "heads", "epochs", "batch_size", "learning_rate", "clip_norm"});
  read_field(j, path, "blocks", c.blocks);
  read_field(j, path, "dim", c.dim);
  read_field(j, path, "ffn_dim", c.ffn_dim);
  read_field(j, path, "heads", c.heads);
  read_field(j, path, "epochs", c.epochs);
  read_field(j, path, "batch_size", c.batch_size);
  read_field(j, path, "learning_rate", c.learning_rate);
  read_field(j, path, "clip_norm", c.clip_norm);
  c.validate();
  return c;
}

Json to_json(const lm::NeuralLmConfig& c) {
  return {{"blocks", c.blocks}, {"dim", c.dim},           {"ffn_dim", c.ffn_dim},
          {"heads", c.heads},   {"epochs", c.epochs},     {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"clip_norm", c.clip_norm}};
}

decode::FusionConfig fusion_config_from_json(const Json& j, const std::string& path) {
  decode::FusionConfig c;
  require_keys(j, path, {"alpha", "beta", "beam", "nbest"});
  read_field(j, path, "alpha", c.alpha);
  read_field(j, path, "beta", c.beta);
  read_field(j, path, "beam", c.beam);
  read_field(j, path, "nbest", c.nbest);
  c.validate();
  return c;
}

Json to_json(const decode::FusionConfig& c) {
  return {{"alpha", c.alpha}, {"beta", c.beta}, {"beam", c.beam}, {"nbest", c.nbest}};
}

namespace {

void read_range(const Json& j, const std::string& path, const char* key, double& lo, double& hi) {
  auto it = j.find(key);
  if (it == j.end()) return;
  const std::string p = join_path(path, key);
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
    throw ConfigError(p, "expected [min, max]");
  }
  lo = (*it)[0].get<double>();
  hi = (*it)[1].get<double>();
  if (!(lo <= hi)) throw ConfigError(p, "min must not exceed max");
}

}  // namespace

decode::TuneConfig tune_config_from_json(const Json& j, const std::string& path) {
  decode::TuneConfig c;
  require_keys(j, path, {"trials", "alpha_range", "beta_range"});
  read_field(j, path, "trials", c.trials);
  read_range(j, path, "alpha_range", c.alpha_min, c.alpha_max);
  read_range(j, path, "beta_range", c.beta_min, c.beta_max);
  if (c.trials < 1) throw ConfigError(path + ".trials", "must be >= 1");
  return c;
}

Json to_json(const decode::TuneConfig& c) {
  return {{"trials", c.trials}, {"alpha_range", {c.alpha_min, c.alpha_max}}, {"beta_range", {c.beta_min, c.beta_max}}};
}

seq2seq::S2STrainConfig s2s_train_config_from_json(const Json& j, const std::string& path) {
  seq2seq::S2STrainConfig c;
  require_keys(j, path, {"epochs", "batch_size", "learning_rate", "final_lr_scale", "clip_norm"});
  read_field(j, path, "epochs", c.epochs);
  read_field(j, path, "batch_size", c.batch_size);
  read_field(j, path, "learning_rate", c.learning_rate);
  read_field(j, path, "final_lr_scale", c.final_lr_scale);
  read_field(j, path, "clip_norm", c.clip_norm);
  c.validate();
  return c;
}

Json to_json(const seq2seq::S2STrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"final_lr_scale", c.final_lr_scale},
          {"clip_norm", c.clip_norm}};
}

void PipelineConfig::validate() const {
  wav2vec.validate();
  pretrain.validate();
  finetune.validate();
  lm.ngram.validate();
  lm.neural.validate();
  decode.fusion.validate();
  decode.tune.validate();
  if (decode.pseudo_label_beam < decode.fusion.nbest) {
    throw ConfigError("decode.pseudo_label_beam", "must be >= decode.nbest");
  }
  final_model.finetune.validate();
  final_model.s2s.validate();
  final_model.s2s_train.validate();
  if (final_model.word_pieces < 2) throw ConfigError("final.word_pieces", "must be >= 2");
  if (arms.empty()) throw ConfigError("arms", "at least one arm is required");
  std::set<Arm> seen;
  for (Arm a : arms)
    if (!seen.insert(a).second) throw ConfigError("arms", "duplicate arm \"" + std::string(to_string(a)) + "\"");
  if (corpus.lm_sentences < 1) throw ConfigError("corpus.lm_sentences", "must be >= 1");
}

PipelineConfig pipeline_config_from_json(const Json& j) {
  PipelineConfig c;
  c.wav2vec = desk_wav2vec();
  c.pretrain = pretrain_config_from_json(Json::object(), "pretrain");
  c.finetune = finetune_config_from_json(Json::object(), "finetune");
  c.final_model.finetune = finetune_config_from_json(Json::object(), "final.finetune");
  c.final_model.finetune.epochs = 12;
  c.final_model.s2s.dim = 64;
  c.final_model.s2s.ffn_dim = 128;
  c.final_model.s2s.encoder_blocks = 2;
  c.final_model.s2s.decoder_blocks = 1;
  c.corpus.grammar.pitch_jitter = 0.05;
  c.corpus.grammar.lexicon_size = 120;
  c.corpus.grammar.successors = 12;

  require_keys(j, "", {"corpus", "wav2vec", "pretrain", "finetune", "lm", "decode", "final", "arms", "ablation", "seed"});
  if (auto it = j.find("corpus"); it != j.end()) {
    require_keys(*it, "corpus", {"grammar", "grammar_seed", "corpus_seed", "split", "lm_sentences"});
    if (auto g = it->find("grammar"); g != it->end()) {
      Json merged = to_json(c.corpus.grammar);
      merged.merge_patch(*g);
      c.corpus.grammar = grammar_options_from_json(merged, "corpus.grammar");
    }
    read_field(*it, "corpus", "grammar_seed", c.corpus.grammar_seed);
    read_field(*it, "corpus", "corpus_seed", c.corpus.corpus_seed);
    if (auto s = it->find("split"); s != it->end()) c.corpus.split = split_from_json(*s, "corpus.split");
    read_field(*it, "corpus", "lm_sentences", c.corpus.lm_sentences);
  }
  if (auto it = j.find("wav2vec"); it != j.end()) {
    // fields not given keep the desk defaults
    Json merged = wav2vec::to_json(c.wav2vec);
    merged.merge_patch(*it);
    c.wav2vec = wav2vec::wav2vec_config_from_json(merged, "wav2vec");
  }
  if (auto it = j.find("pretrain"); it != j.end()) c.pretrain = pretrain_config_from_json(*it, "pretrain");
  if (auto it = j.find("finetune"); it != j.end()) c.finetune = finetune_config_from_json(*it, "finetune");
  if (auto it = j.find("lm"); it != j.end()) {
    require_keys(*it, "lm", {"ngram", "neural", "rescore"});
    if (auto n = it->find("ngram"); n != it->end()) c.lm.ngram = ngram_config_from_json(*n, "lm.ngram");
    if (auto n = it->find("neural"); n != it->end()) c.lm.neural = neural_lm_config_from_json(*n, "lm.neural");
    read_field(*it, "lm", "rescore", c.lm.rescore);
  }
  if (auto it = j.find("decode"); it != j.end()) {
    require_keys(*it, "decode", {"beam", "nbest", "pseudo_label_beam", "tune"});
    Json fusion = Json::object();
    if (it->contains("beam")) fusion["beam"] = (*it)["beam"];
    if (it->contains("nbest")) fusion["nbest"] = (*it)["nbest"];
    c.decode.fusion = fusion_config_from_json(fusion, "decode");
    read_field(*it, "decode", "pseudo_label_beam", c.decode.pseudo_label_beam);
    if (auto t = it->find("tune"); t != it->end()) c.decode.tune = tune_config_from_json(*t, "decode.tune");
  }
  if (auto it = j.find("final"); it != j.end()) {
    require_keys(*it, "final", {"variant", "ctc_init", "finetune", "s2s", "s2s_train", "word_pieces"});
    std::string variant(to_string(c.final_model.variant));
    read_field(*it, "final", "variant", variant);
    c.final_model.variant = parse_variant(variant);
    std::string init(to_string(c.final_model.ctc_init));
    read_field(*it, "final", "ctc_init", init);
    c.final_model.ctc_init = parse_ctc_init(init);
    if (auto f = it->find("finetune"); f != it->end()) {
      Json merged = to_json(c.final_model.finetune);
      merged.merge_patch(*f);
      c.final_model.finetune = finetune_config_from_json(merged, "final.finetune");
    }
    if (auto s = it->find("s2s"); s != it->end()) {
      Json merged = seq2seq::to_json(c.final_model.s2s);
      merged.merge_patch(*s);
      c.final_model.s2s = seq2seq::s2s_config_from_json(merged, "final.s2s");
    }
    if (auto s = it->find("s2s_train"); s != it->end())
      c.final_model.s2s_train = s2s_train_config_from_json(*s, "final.s2s_train");
    read_field(*it, "final", "word_pieces", c.final_model.word_pieces);
  }
  const bool has_arms = j.contains("arms");
  if (has_arms) {
    const Json& a = j.at("arms");
    if (!a.is_array()) throw ConfigError("arms", "expected an array of arm names");
    c.arms.clear();
    for (const auto& name : a) {
      if (!name.is_string()) throw ConfigError("arms", "expected an array of arm names");
      c.arms.push_back(parse_arm(name.get<std::string>()));
    }
  }
  if (auto it = j.find("ablation"); it != j.end()) {
    if (has_arms) throw ConfigError("ablation", "cannot be combined with \"arms\"");
    require_keys(*it, "ablation", {"no_pretrain", "no_selftrain"});
    bool no_pretrain = false;
    bool no_selftrain = false;
    read_field(*it, "ablation", "no_pretrain", no_pretrain);
    read_field(*it, "ablation", "no_selftrain", no_selftrain);
    c.arms = {arm_from_flags(no_pretrain, no_selftrain)};
  }
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    read_field(j, "", "seed", s);
    c.seed = s;
  }
  c.validate();
  return c;
}

Json to_json(const PipelineConfig& c) {
  Json arms = Json::array();
  for (Arm a : c.arms) arms.push_back(std::string(to_string(a)));
  Json j{{"corpus",
          {{"grammar", to_json(c.corpus.grammar)},
           {"grammar_seed", c.corpus.grammar_seed},
           {"corpus_seed", c.corpus.corpus_seed},
           {"split", split_to_json(c.corpus.split)},
           {"lm_sentences", c.corpus.lm_sentences}}},
         {"wav2vec", wav2vec::to_json(c.wav2vec)},
         {"pretrain", to_json(c.pretrain)},
         {"finetune", to_json(c.finetune)},
         {"lm", {{"ngram", to_json(c.lm.ngram)}, {"neural", to_json(c.lm.neural)}, {"rescore", c.lm.rescore}}},
         {"decode",
          {{"beam", c.decode.fusion.beam},
           {"nbest", c.decode.fusion.nbest},
           {"pseudo_label_beam", c.decode.pseudo_label_beam},
           {"tune", to_json(c.decode.tune)}}},
         {"final",
          {{"variant", to_string(c.final_model.variant)},
           {"ctc_init", to_string(c.final_model.ctc_init)},
           {"finetune", to_json(c.final_model.finetune)},
           {"s2s", seq2seq::to_json(c.final_model.s2s)},
           {"s2s_train", to_json(c.final_model.s2s_train)},
           {"word_pieces", c.final_model.word_pieces}}},
         {"arms", arms}};
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

void set_dotted(Json& root, const std::string& dotted, const std::string& value) {
  if (dotted.empty()) throw ConfigError("<override>", "empty field path");
  Json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError(dotted, "empty path component");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError(dotted.substr(0, start ? start - 1 : 0), "not an object");
      *node = Json::object();
    }
    if (dot == std::string::npos) {
      Json parsed = Json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? Json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace semiasr::selftrain
