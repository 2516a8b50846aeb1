// wav2vec/model.cpp
#include "semiasr/wav2vec/model.hpp"

#include <algorithm>
#include <cmath>

#include "semiasr/error.hpp"

namespace semiasr::wav2vec {

using nn::Graph;
using nn::Tensor;
using nn::Var;

FeatureEncoderConfig FeatureEncoderConfig::large() {
  FeatureEncoderConfig c;
  c.layers = {{5, 10, 512}, {2, 3, 512}, {2, 3, 512}, {2, 3, 512}, {2, 3, 512}, {2, 2, 512}, {2, 2, 512}};
  return c;
}

void FeatureEncoderConfig::validate() const {
  if (layers.empty()) throw ConfigError("encoder.layers", "at least one layer required");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string p = "encoder.layers[" + std::to_string(i) + "]";
    if (l.stride < 1) throw ConfigError(p + ".stride", "must be >= 1");
    if (l.kernel < l.stride) throw ConfigError(p + ".kernel", "must be >= stride");
    if (l.channels < 1) throw ConfigError(p + ".channels", "must be >= 1");
  }
}

void ContextConfig::validate() const {
  if (heads == 0 || dim % heads != 0) throw ConfigError("context.heads", "model dim must be divisible by heads");
  if (ffn_dim == 0) throw ConfigError("context.ffn_dim", "must be positive");
  if (positional == PositionalScheme::kConv && positional_kernel % 2 == 0) {
    throw ConfigError("context.positional_kernel", "must be odd");
  }
}

void QuantizerConfig::validate() const {
  if (groups < 1) throw ConfigError("quantizer.groups", "must be >= 1");
  if (entries < 1) throw ConfigError("quantizer.entries", "must be >= 1");
  if (codeword_dim < 1) throw ConfigError("quantizer.codeword_dim", "must be >= 1");
  if (!(temperature_start > 0.0) || !(temperature_end > 0.0)) {
    throw ConfigError("quantizer.temperature_start", "temperatures must be positive");
  }
  if (!(temperature_decay > 0.0) || temperature_decay > 1.0) {
    throw ConfigError("quantizer.temperature_decay", "must be in (0, 1]");
  }
  if (!(logit_init_scale > 0.0) || !std::isfinite(logit_init_scale)) {
    throw ConfigError("quantizer.logit_init_scale", "must be positive and finite");
  }
}

double QuantizerConfig::temperature(std::size_t epoch) const {
  return std::max(temperature_end, temperature_start * std::pow(temperature_decay, static_cast<double>(epoch)));
}

void MaskConfig::validate() const {
  if (span < 1) throw ConfigError("mask.span", "must be >= 1");
  if (start_prob < 0.0 || start_prob > 1.0) throw ConfigError("mask.start_prob", "must be in [0, 1]");
}

void Wav2VecConfig::validate() const {
  encoder.validate();
  context.validate();
  quantizer.validate();
  mask.validate();
}

std::vector<std::size_t> MaskSet::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < covered.size(); ++t)
    if (covered[t]) out.push_back(t);
  return out;
}

std::size_t MaskSet::count() const { return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), true)); }

MaskSet sample_masks(std::size_t length, const MaskConfig& config, std::mt19937_64& rng) {
  config.validate();
  MaskSet m;
  m.covered.assign(length, false);
  std::bernoulli_distribution start(config.start_prob);
  for (std::size_t t = 0; t < length; ++t) {
    if (!start(rng)) continue;
    m.starts.push_back(t);
    const std::size_t end = std::min(t + config.span, length);
    for (std::size_t i = t; i < end; ++i) m.covered[i] = true;
  }
  return m;
}

ReceptiveField receptive_field(const FeatureEncoderConfig& config) {
  config.validate();
  ReceptiveField rf{1, 1};
  for (auto it = config.layers.rbegin(); it != config.layers.rend(); ++it) {
    rf.samples = (rf.samples - 1) * it->stride + it->kernel;
    rf.stride *= it->stride;
  }
  return rf;
}

std::size_t encoder_output_length(std::size_t samples, const FeatureEncoderConfig& config) {
  std::size_t t = samples;
  for (const auto& l : config.layers) {
    if (t < l.kernel) return 0;
    t = (t - l.kernel) / l.stride + 1;
  }
  return t;
}

Wav2VecModel::Wav2VecModel(Wav2VecConfig config, std::uint64_t seed) : config_(std::move(config)), params_(seed) {
  config_.validate();
  init(seed);
}

Wav2VecModel::Wav2VecModel(Wav2VecConfig config, nn::ParameterSet params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  // Build a reference set to check names and shapes.
  Wav2VecModel reference(config_, 0);
  for (const auto& [name, p] : reference.params_.entries()) {
    if (!params_.contains(name)) throw Error("wav2vec: checkpoint lacks parameter '" + name + "'");
    if (!params_.at(name).value.same_shape(p.value)) {
      throw ShapeError("wav2vec: parameter '" + name + "' has shape " + params_.at(name).value.shape_string() +
                       ", expected " + p.value.shape_string());
    }
  }
}

void Wav2VecModel::init(std::uint64_t) {
  const auto& enc = config_.encoder;
  std::size_t cin = 1;
  for (std::size_t i = 0; i < enc.layers.size(); ++i) {
    const auto& l = enc.layers[i];
    const std::string p = "enc." + std::to_string(i);
    params_.add_weight(p + ".w", l.kernel * cin, l.channels);
    params_.add_bias(p + ".b", l.channels);
    if (enc.layer_norm) nn::init_layer_norm(params_, p + ".ln", l.channels);
    cin = l.channels;
  }
  const std::size_t c = enc.output_channels();
  nn::init_layer_norm(params_, "feat_ln", c);
  const auto& ctx = config_.context;
  nn::init_linear(params_, "proj", c, ctx.dim);
  params_.add_uniform("mask_emb", {1, ctx.dim}, 1.0);
  if (ctx.positional == PositionalScheme::kConv) {
    params_.add_weight("pos_conv.w", ctx.positional_kernel * ctx.dim, ctx.dim);
    params_.add_bias("pos_conv.b", ctx.dim);
  }
  for (std::size_t b = 0; b < ctx.blocks; ++b) nn::init_transformer_block(params_, "ctx." + std::to_string(b), ctx.block());
  nn::init_layer_norm(params_, "ctx_ln", ctx.dim);
  const auto& q = config_.quantizer;
  nn::init_linear(params_, "quant.logits", c, q.groups * q.entries);
  for (double& v : params_.at("quant.logits.w").value.values()) v *= q.logit_init_scale;
  for (std::size_t g = 0; g < q.groups; ++g) {
    params_.add_uniform("quant.codebook." + std::to_string(g), {q.entries, q.codeword_dim}, 1.0);
  }
  nn::init_linear(params_, "final_proj", ctx.dim, q.output_dim());
}

Var Wav2VecModel::encode_features(Graph& g, std::span<const float> samples) const {
  const auto rf = receptive_field(config_.encoder);
  if (samples.size() < rf.samples) {
    throw Error("encode_features: input of " + std::to_string(samples.size()) +
                " samples is shorter than the receptive field; minimum length is " + std::to_string(rf.samples));
  }
  // zero-mean, unit-variance waveform
  double mean = 0.0;
  for (float s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (float s : samples) var += (s - mean) * (s - mean);
  var /= static_cast<double>(samples.size());
  const double inv = 1.0 / std::sqrt(var + 1e-7);
  Tensor x = Tensor::matrix(samples.size(), 1);
  for (std::size_t i = 0; i < samples.size(); ++i) x[i] = (samples[i] - mean) * inv;

  Var h = g.constant(std::move(x));
  const auto& enc = config_.encoder;
  for (std::size_t i = 0; i < enc.layers.size(); ++i) {
    const std::string p = "enc." + std::to_string(i);
    h = nn::conv1d(h, g.param(p + ".w"), g.param(p + ".b"), enc.layers[i].kernel, enc.layers[i].stride);
    if (enc.layer_norm) h = nn::layer_norm(g, h, p + ".ln");
    h = nn::gelu(h);
  }
  return nn::layer_norm(g, h, "feat_ln");
}

Var Wav2VecModel::contextualize(Graph& g, Var latents, const std::vector<bool>* mask) const {
  const auto& ctx = config_.context;
  const std::size_t c = config_.encoder.output_channels();
  if (latents.cols() != c) {
    throw ShapeError("contextualize: latent dim " + std::to_string(latents.cols()) + " != encoder channels " +
                     std::to_string(c));
  }
  Var x = nn::linear(g, latents, "proj");
  if (mask) {
    if (mask->size() != x.rows()) throw ShapeError("contextualize: mask length differs from sequence length");
    x = nn::replace_rows(x, *mask, g.param("mask_emb"));
  }
  if (ctx.positional == PositionalScheme::kSinusoidal) x = nn::add_const(x, nn::sinusoidal_positions(x.rows(), ctx.dim));
  if (ctx.positional == PositionalScheme::kConv) {
    const std::size_t pad = ctx.positional_kernel / 2;
    Var zeros = g.constant(Tensor::matrix(pad, ctx.dim));
    Var padded = pad == 0 ? x : nn::concat_rows({zeros, x, zeros});
    x = nn::add(x, nn::gelu(nn::conv1d(padded, g.param("pos_conv.w"), g.param("pos_conv.b"), ctx.positional_kernel, 1)));
  }
  for (std::size_t b = 0; b < ctx.blocks; ++b) x = nn::transformer_block(g, x, "ctx." + std::to_string(b), ctx.block());
  return nn::layer_norm(g, x, "ctx_ln");
}

QuantizerOutput Wav2VecModel::quantize(Graph& g, Var latents, QuantizeMode mode, double temperature,
                                       std::mt19937_64* rng) const {
  const auto& qc = config_.quantizer;
  if (!(temperature > 0.0)) throw ConfigError("quantizer.temperature", "must be positive");
  if (mode == QuantizeMode::kTrain && rng == nullptr) throw Error("quantize: train mode needs a random generator");
  Var logits = nn::linear(g, latents, "quant.logits");
  const std::size_t rows = logits.rows();
  QuantizerOutput out;
  out.codes.assign(rows, std::vector<std::size_t>(qc.groups, 0));
  std::vector<Var> parts;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t grp = 0; grp < qc.groups; ++grp) {
    Var lg = nn::slice_cols(logits, grp * qc.entries, (grp + 1) * qc.entries);
    out.probs.push_back(nn::softmax_rows(lg));
    Var codebook = g.param("quant.codebook." + std::to_string(grp));
    if (mode == QuantizeMode::kTrain) {
      Tensor noise = Tensor::matrix(rows, qc.entries);
      for (double& v : noise.values()) {
        double u = uniform(*rng);
        u = std::clamp(u, 1e-12, 1.0 - 1e-12);
        v = -std::log(-std::log(u));
      }
      const Tensor& lv = lg.value();
      Tensor hard = Tensor::matrix(rows, qc.entries);
      for (std::size_t r = 0; r < rows; ++r) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < qc.entries; ++k)
          if (lv(r, k) + noise(r, k) > lv(r, best) + noise(r, best)) best = k;
        hard(r, best) = 1.0;
        out.codes[r][grp] = best;
      }
      Var soft = nn::softmax_rows(nn::scale(nn::add_const(lg, noise), 1.0 / temperature));
      out.gumbel_soft.push_back(soft);
      parts.push_back(nn::matmul(nn::straight_through(hard, soft), codebook));
    } else {
      const Tensor& lv = lg.value();
      std::vector<std::size_t> idx(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        auto row = lv.row_span(r);
        idx[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        out.codes[r][grp] = idx[r];
      }
      parts.push_back(nn::gather_rows(codebook, idx));
    }
  }
  out.q = qc.groups == 1 ? parts.front() : nn::concat_cols(parts);
  return out;
}

Var Wav2VecModel::project_context(Graph& g, Var context) const { return nn::linear(g, context, "final_proj"); }

}  // namespace semiasr::wav2vec
