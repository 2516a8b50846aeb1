// seq2seq/model.cpp
#include "semiasr/seq2seq/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "semiasr/corpus/vocab_json.hpp"
#include "semiasr/error.hpp"
#include "semiasr/nn/adam.hpp"
#include "semiasr/nn/checkpoint.hpp"
#include "semiasr/util.hpp"

namespace semiasr::seq2seq {

using nn::Graph;
using nn::Tensor;
using nn::Var;

void S2SConfig::validate() const {
  features.validate();
  if (frontend_layers < 1) throw ConfigError("s2s.frontend_layers", "must be >= 1");
  if (frontend_kernel < 1) throw ConfigError("s2s.frontend_kernel", "must be >= 1");
  for (std::size_t s : frontend_strides)
    if (s < 1) throw ConfigError("s2s.frontend_strides", "strides must be >= 1");
  if (encoder_blocks < 1) throw ConfigError("s2s.encoder_blocks", "must be >= 1");
  if (decoder_blocks < 1) throw ConfigError("s2s.decoder_blocks", "must be >= 1");
  if (heads == 0 || dim % heads != 0) throw ConfigError("s2s.heads", "dim must be divisible by heads");
  if (ffn_dim < 1) throw ConfigError("s2s.ffn_dim", "must be >= 1");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ConfigError("s2s.label_smoothing", "must be in [0, 1)");
}

Json to_json(const S2SConfig& c) {
  return {{"features", {{"window", c.features.window}, {"hop", c.features.hop}, {"bins", c.features.bins}}},
          {"frontend_layers", c.frontend_layers},
          {"frontend_kernel", c.frontend_kernel},
          {"frontend_strides", c.frontend_strides},
          {"encoder_blocks", c.encoder_blocks},
          {"decoder_blocks", c.decoder_blocks},
          {"dim", c.dim},
          {"ffn_dim", c.ffn_dim},
          {"heads", c.heads},
          {"label_smoothing", c.label_smoothing}};
}

S2SConfig s2s_config_from_json(const Json& j, const std::string& path) {
  S2SConfig c;
  require_keys(j, path, {"features", "frontend_layers", "frontend_kernel", "frontend_strides", "encoder_blocks",
                         "decoder_blocks", "dim", "ffn_dim", "heads", "label_smoothing"});
  if (auto it = j.find("features"); it != j.end()) {
    const std::string p = join_path(path, "features");
    require_keys(*it, p, {"window", "hop", "bins"});
    read_field(*it, p, "window", c.features.window);
    read_field(*it, p, "hop", c.features.hop);
    read_field(*it, p, "bins", c.features.bins);
  }
  read_field(j, path, "frontend_layers", c.frontend_layers);
  read_field(j, path, "frontend_kernel", c.frontend_kernel);
  if (auto it = j.find("frontend_strides"); it != j.end()) {
    if (!it->is_array()) throw ConfigError(join_path(path, "frontend_strides"), "expected an array");
    c.frontend_strides.clear();
    for (const auto& s : *it) {
      if (!s.is_number_unsigned()) throw ConfigError(join_path(path, "frontend_strides"), "expected non-negative integers");
      c.frontend_strides.push_back(s.get<std::size_t>());
    }
  }
  read_field(j, path, "encoder_blocks", c.encoder_blocks);
  read_field(j, path, "decoder_blocks", c.decoder_blocks);
  read_field(j, path, "dim", c.dim);
  read_field(j, path, "ffn_dim", c.ffn_dim);
  read_field(j, path, "heads", c.heads);
  read_field(j, path, "label_smoothing", c.label_smoothing);
  c.validate();
  return c;
}

S2SModel::S2SModel(const S2SConfig& config, corpus::Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), params_(seed) {
  config_.validate();
  if (vocab_.size() == 0) throw ConfigError("s2s.vocab", "empty vocabulary");
  for (std::size_t i = 0; i < config_.frontend_layers; ++i) {
    const std::size_t in = i == 0 ? config_.features.bins : config_.dim;
    params_.add_weight("front." + std::to_string(i) + ".w", config_.frontend_kernel * in, config_.dim);
    params_.add_bias("front." + std::to_string(i) + ".b", config_.dim);
  }
  for (std::size_t b = 0; b < config_.encoder_blocks; ++b)
    nn::init_transformer_block(params_, "enc." + std::to_string(b), config_.block());
  nn::init_layer_norm(params_, "enc_ln", config_.dim);
  params_.add_uniform("emb", {vocab_.size() + 2, config_.dim}, 1.0);
  for (std::size_t b = 0; b < config_.decoder_blocks; ++b)
    nn::init_transformer_block(params_, "dec." + std::to_string(b), config_.block(), true);
  nn::init_layer_norm(params_, "dec_ln", config_.dim);
  nn::init_linear(params_, "out", config_.dim, outputs());
}

S2SModel::S2SModel(const S2SConfig& config, corpus::Vocabulary vocab, nn::ParameterSet params)
    : config_(config), vocab_(std::move(vocab)), params_(std::move(params)) {
  S2SModel reference(config_, vocab_, 0);
  for (const auto& [name, p] : reference.params_.entries()) {
    if (!params_.contains(name) || !params_.at(name).value.same_shape(p.value)) {
      throw ShapeError("s2s: parameter '" + name + "' missing or of the wrong shape");
    }
  }
}

Tensor S2SModel::features(std::span<const float> samples) const {
  Tensor f = corpus::logmel(samples, config_.features);
  const std::size_t n = f.rows();
  for (std::size_t c = 0; c < f.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += f(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (f(r, c) - mean) * (f(r, c) - mean);
    const double inv = 1.0 / std::sqrt(var / static_cast<double>(n) + 1e-5);
    for (std::size_t r = 0; r < n; ++r) f(r, c) = (f(r, c) - mean) * inv;
  }
  return f;
}

std::size_t S2SModel::encoder_frames(std::size_t f) const {
  for (std::size_t i = 0; i < config_.frontend_layers; ++i) {
    if (f < config_.frontend_kernel) return 0;
    f = (f - config_.frontend_kernel) / config_.stride(i) + 1;
  }
  return f;
}

Var S2SModel::encode(Graph& g, const Tensor& features) const {
  if (features.cols() != config_.features.bins) throw ShapeError("s2s encode: feature dim differs from the mel bins");
  if (encoder_frames(features.rows()) == 0) {
    throw Error("s2s encode: " + std::to_string(features.rows()) + " feature frames are too few for the frontend");
  }
  Var h = g.constant(features);
  for (std::size_t i = 0; i < config_.frontend_layers; ++i) {
    const std::string p = "front." + std::to_string(i);
    h = nn::gelu(nn::conv1d(h, g.param(p + ".w"), g.param(p + ".b"), config_.frontend_kernel, config_.stride(i)));
  }
  h = nn::add_const(h, nn::sinusoidal_positions(h.rows(), config_.dim));
  for (std::size_t b = 0; b < config_.encoder_blocks; ++b)
    h = nn::transformer_block(g, h, "enc." + std::to_string(b), config_.block());
  return nn::layer_norm(g, h, "enc_ln");
}

Var S2SModel::decode(Graph& g, Var memory, const std::vector<int>& inputs) const {
  if (inputs.empty()) throw Error("s2s decode: empty decoder input");
  std::vector<std::size_t> rows;
  for (int id : inputs) {
    if (id < 0 || id > bos_id()) throw Error("s2s decode: token id " + std::to_string(id) + " out of range");
    rows.push_back(static_cast<std::size_t>(id));
  }
  Var x = nn::gather_rows(g.param("emb"), rows);
  x = nn::add_const(x, nn::sinusoidal_positions(inputs.size(), config_.dim));
  const Tensor mask = nn::causal_mask(inputs.size());
  for (std::size_t b = 0; b < config_.decoder_blocks; ++b)
    x = nn::transformer_block(g, x, "dec." + std::to_string(b), config_.block(), &mask, memory);
  return nn::log_softmax_rows(nn::linear(g, nn::layer_norm(g, x, "dec_ln"), "out"));
}

Var S2SModel::loss(Graph& g, const Tensor& features, const std::vector<int>& pieces, double eps) const {
  std::vector<int> inputs{bos_id()};
  inputs.insert(inputs.end(), pieces.begin(), pieces.end());
  std::vector<std::size_t> target(pieces.begin(), pieces.end());
  target.push_back(static_cast<std::size_t>(eos_id()));
  Var logp = decode(g, encode(g, features), inputs);
  Var nll = nn::scale(nn::mean(nn::pick(logp, target)), -1.0);
  if (eps == 0.0) return nll;
  // mean over all entries = mean over tokens of the per-row average log-prob
  return nn::add(nn::scale(nll, 1.0 - eps), nn::scale(nn::mean(logp), -eps));
}

void S2SModel::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(path, params_);
  write_json_file(sidecar_path(path), {{"kind", "s2s"}, {"s2s", to_json(config_)}, {"vocab", corpus::to_json(vocab_)}});
}

S2SModel S2SModel::load(const std::filesystem::path& path) {
  const Json meta = read_json_file(sidecar_path(path));
  if (meta.value("kind", "") != "s2s") throw IoError(path.string() + ": not a seq2seq checkpoint");
  return S2SModel(s2s_config_from_json(meta.at("s2s")), corpus::vocabulary_from_json(meta.at("vocab")),
                  nn::load_checkpoint(path));
}

double smoothed_ce_floor(double eps, std::size_t classes) {
  const double k = static_cast<double>(classes);
  const double on = 1.0 - eps + eps / k;
  const double off = eps / k;
  double h = -on * std::log(on);
  if (off > 0.0) h -= (k - 1.0) * off * std::log(off);
  return h;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Beam {
  std::vector<int> tokens;
  double am = 0.0;
  double lm = 0.0;
  std::size_t words = 0;
  std::string partial;
  lm::LmState state;
  double score = 0.0;
  bool finished = false;
};

double fused(const Beam& b, const decode::FusionConfig& f) {
  double s = b.am;
  if (f.alpha != 0.0) s += f.alpha * b.lm;
  if (f.beta != 0.0) s += f.beta * static_cast<double>(b.words);
  return s;
}

/// Completes the pending word (if any) and, at the utterance end, the sentence.
void close_word(Beam& b, const lm::LmScorer* lm) {
  if (b.partial.empty()) return;
  if (lm) {
    lm::LmState next;
    b.lm += lm->score(b.state, b.partial, &next);
    b.state = std::move(next);
  }
  ++b.words;
  b.partial.clear();
}

bool beam_before(const Beam& a, const Beam& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

decode::NBestList s2s_beam_decode(const S2SModel& model, const Tensor& features, const lm::LmScorer* lm,
                                  const S2SDecodeConfig& config) {
  config.fusion.validate();
  const auto& fusion = config.fusion;
  const int eos = model.eos_id();
  const int space = model.vocab().space_id();
  auto& params = const_cast<nn::ParameterSet&>(model.params());
  Tensor memory;
  {
    Graph g(&params);
    memory = model.encode(g, features).value();
  }
  const std::size_t max_len = config.max_length ? config.max_length : 2 * memory.rows() + 10;

  Beam root;
  if (lm) root.state = lm->initial();
  std::vector<Beam> live{root};
  std::vector<Beam> done;
  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Beam> cand;
    for (const Beam& b : live) {
      std::vector<int> inputs{model.bos_id()};
      inputs.insert(inputs.end(), b.tokens.begin(), b.tokens.end());
      Graph g(&params);
      const Tensor logp = model.decode(g, g.constant(memory), inputs).value();
      const auto row = logp.row_span(logp.rows() - 1);
      for (int k = 0; k <= eos; ++k) {
        Beam c = b;
        c.am += row[static_cast<std::size_t>(k)];
        if (k == eos) {
          close_word(c, lm);
          if (lm) c.lm += lm->end_score(c.state);
          c.finished = true;
        } else {
          c.tokens.push_back(k);
          if (k == space) close_word(c, lm);
          else c.partial += model.vocab().token(k);
        }
        c.score = fused(c, fusion);
        if (c.am == kNegInf) continue;
        cand.push_back(std::move(c));
      }
    }
    const std::size_t keep = fusion.exhaustive ? cand.size() : std::min(cand.size(), fusion.beam);
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), beam_before);
    cand.resize(keep);
    live.clear();
    for (Beam& c : cand) (c.finished ? done : live).push_back(std::move(c));
  }
  if (done.empty()) {
    // length limit reached without an end-of-sequence: close the survivors as they are
    for (Beam& b : live) {
      close_word(b, lm);
      if (lm) b.lm += lm->end_score(b.state);
      b.score = fused(b, fusion);
      done.push_back(std::move(b));
    }
  }
  std::sort(done.begin(), done.end(), beam_before);
  decode::NBestList out;
  out.alpha = fusion.alpha;
  out.beta = fusion.beta;
  std::set<std::vector<int>> seen;
  for (const Beam& b : done) {
    if (out.hyps.size() >= fusion.nbest) break;
    if (!seen.insert(b.tokens).second) continue;
    decode::Hypothesis h;
    h.tokens = b.tokens;
    h.text = normalize_spaces(model.vocab().decode(b.tokens));
    h.am = b.am;
    h.lm = b.lm;
    h.words = b.words;
    h.score = b.score;
    out.hyps.push_back(std::move(h));
  }
  return out;
}

void S2STrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("s2s_train.batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("s2s_train.learning_rate", "must be positive");
  if (!(final_lr_scale >= 0.0 && final_lr_scale <= 1.0)) throw ConfigError("s2s_train.final_lr_scale", "must be in [0, 1]");
  if (!(clip_norm > 0.0)) throw ConfigError("s2s_train.clip_norm", "must be positive");
}

namespace {

struct Example {
  Tensor features;
  std::vector<int> pieces;
};

std::vector<Example> prepare(const S2SModel& model, const std::vector<const corpus::Utterance*>& utts) {
  std::vector<Example> out;
  for (const corpus::Utterance* u : utts) {
    if (!u->transcript) throw Error("s2s: utterance " + u->id + " has no transcript");
    Example e;
    try {
      e.pieces = model.vocab().encode(*u->transcript);
    } catch (const Error& err) {
      throw Error("s2s: utterance " + u->id + ": " + err.what());
    }
    e.features = model.features(u->samples);
    if (model.encoder_frames(e.features.rows()) == 0) throw Error("s2s: utterance " + u->id + " is too short");
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

std::vector<S2SEpochMetrics> s2s_train_run(S2SModel& model, const std::vector<const corpus::Utterance*>& train,
                                           const std::vector<const corpus::Utterance*>& dev,
                                           const S2STrainConfig& config,
                                           const std::function<void(const S2SEpochMetrics&)>& on_epoch) {
  config.validate();
  if (train.empty() && config.epochs > 0) throw Error("s2s_train: empty training set");
  const auto train_set = prepare(model, train);
  const auto dev_set = prepare(model, dev);
  const double eps = model.config().label_smoothing;
  auto& params = model.params();
  nn::OptimizerState opt({config.learning_rate});
  std::mt19937_64 order_rng(derive_seed(config.seed, "s2s-order"));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t steps_per_epoch = (train_set.size() + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(std::max<std::size_t>(1, steps_per_epoch * config.epochs));

  std::vector<S2SEpochMetrics> history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Graph g(&params);
      std::vector<Var> losses;
      for (std::size_t i = start; i < end; ++i) {
        const Example& e = train_set[order[i]];
        losses.push_back(model.loss(g, e.features, e.pieces, eps));
      }
      Var loss = nn::mean(nn::concat_rows(losses));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NonFiniteError("s2s_train", "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                              std::to_string(opt.step + 1));
      }
      params.zero_grad();
      g.backward(loss);
      nn::clip_grad_norm(params, config.clip_norm);
      const double progress = static_cast<double>(opt.step) / total_steps;
      opt.config.learning_rate = config.learning_rate * (1.0 - (1.0 - config.final_lr_scale) * progress);
      nn::adam_step(params, opt);
      loss_sum += value;
      ++batches;
    }
    S2SEpochMetrics m;
    m.epoch = epoch;
    m.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    if (!dev_set.empty()) {
      double sum = 0.0;
      for (const Example& e : dev_set) {
        Graph g(&params);
        sum += model.loss(g, e.features, e.pieces, eps).value().item();
      }
      m.dev_loss = sum / static_cast<double>(dev_set.size());
    }
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

}  // namespace semiasr::seq2seq
