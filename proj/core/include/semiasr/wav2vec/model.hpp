// semiasr/wav2vec/model.hpp
//
// Pre-trainable acoustic model: strided convolutional feature encoder over raw
// samples, Gumbel-softmax product quantizer over the latents, span masking, and
// a transformer context network over the (masked) latents.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semiasr/nn/graph.hpp"
#include "semiasr/nn/layers.hpp"
#include "semiasr/nn/params.hpp"

namespace semiasr::wav2vec {

struct ConvLayerSpec {
  std::size_t stride = 1;
  std::size_t kernel = 1;
  std::size_t channels = 64;
};

struct FeatureEncoderConfig {
  std::vector<ConvLayerSpec> layers = {{5, 10, 64}, {2, 4, 64}, {2, 4, 64}};
  bool layer_norm = true;

  /// Seven 512-channel blocks with strides (5,2,2,2,2,2,2) and kernels (10,3,3,3,3,2,2).
  static FeatureEncoderConfig large();
  void validate() const;
  std::size_t output_channels() const { return layers.back().channels; }
};

/// kConv adds gelu(conv(x)) over a zero-padded window of `positional_kernel`
/// frames (relative position information); kSinusoidal adds fixed absolute encodings.
enum class PositionalScheme { kNone, kSinusoidal, kConv };

struct ContextConfig {
  std::size_t blocks = 4;
  std::size_t dim = 128;
  std::size_t ffn_dim = 256;
  std::size_t heads = 4;
  PositionalScheme positional = PositionalScheme::kConv;
  std::size_t positional_kernel = 5;  ///< odd

  void validate() const;
  nn::TransformerBlockConfig block() const { return {dim, ffn_dim, heads}; }
};

struct QuantizerConfig {
  std::size_t groups = 2;
  std::size_t entries = 32;
  std::size_t codeword_dim = 16;
  double temperature_start = 2.0;
  double temperature_end = 0.5;
  double temperature_decay = 0.7;  ///< multiplicative per epoch
  /// Multiplies the initial selection weights. Near-uniform logits make the
  /// Gumbel draw pure noise, so small models need peaked logits to get started.
  double logit_init_scale = 1.0;

  void validate() const;
  double temperature(std::size_t epoch) const;
  std::size_t output_dim() const { return groups * codeword_dim; }
};

struct MaskConfig {
  std::size_t span = 10;
  double start_prob = 0.065;

  void validate() const;
};

struct Wav2VecConfig {
  FeatureEncoderConfig encoder;
  ContextConfig context;
  QuantizerConfig quantizer;
  MaskConfig mask;

  void validate() const;
};

/// Masked time steps: covered[t] iff some start s satisfies s <= t < min(s + span, T).
struct MaskSet {
  std::vector<std::size_t> starts;
  std::vector<bool> covered;

  std::vector<std::size_t> indices() const;
  std::size_t count() const;
};

/// Every index starts a span independently with probability `start_prob`; spans
/// are truncated at T and may overlap.
MaskSet sample_masks(std::size_t length, const MaskConfig& config, std::mt19937_64& rng);

struct ReceptiveField {
  std::size_t samples = 0;  ///< input samples seen by one output frame
  std::size_t stride = 0;   ///< input samples between consecutive frames
};

/// rf <- (rf - 1) * stride + kernel, from the last layer to the first.
ReceptiveField receptive_field(const FeatureEncoderConfig& config);
/// Applies T_out = floor((T_in - k) / s) + 1 per layer; 0 when the input is too short.
std::size_t encoder_output_length(std::size_t samples, const FeatureEncoderConfig& config);

enum class QuantizeMode { kTrain, kEval };

struct QuantizerOutput {
  nn::Var q;                                 ///< [T, groups * codeword_dim], hard codewords
  std::vector<nn::Var> probs;                ///< per group softmax(logits), no noise: [T, entries]
  std::vector<nn::Var> gumbel_soft;          ///< per group tempered noisy softmax (train mode only)
  std::vector<std::vector<std::size_t>> codes;  ///< [T][group] selected entry
};

class Wav2VecModel {
 public:
  Wav2VecModel(Wav2VecConfig config, std::uint64_t seed);
  /// Wraps existing parameters (e.g. from a checkpoint); checks every expected tensor exists.
  Wav2VecModel(Wav2VecConfig config, nn::ParameterSet params);

  const Wav2VecConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  /// Layer-normalized latents z_1..z_T, [T, C]. Throws when the input is shorter
  /// than the receptive field.
  nn::Var encode_features(nn::Graph& g, std::span<const float> samples) const;

  /// Context representations [T, dim]. Rows flagged in `mask` are replaced by the
  /// learned mask embedding after the input projection.
  nn::Var contextualize(nn::Graph& g, nn::Var latents, const std::vector<bool>* mask = nullptr) const;

  /// Quantizes latent rows. In train mode Gumbel noise drawn from `rng` is added
  /// and gradients flow through the tempered softmax (straight-through).
  QuantizerOutput quantize(nn::Graph& g, nn::Var latents, QuantizeMode mode, double temperature,
                           std::mt19937_64* rng = nullptr) const;

  /// Projects context rows into the quantized-target space.
  nn::Var project_context(nn::Graph& g, nn::Var context) const;

  std::size_t min_samples() const { return receptive_field(config_.encoder).samples; }

 private:
  void init(std::uint64_t seed);

  Wav2VecConfig config_;
  nn::ParameterSet params_;
};

}  // namespace semiasr::wav2vec
