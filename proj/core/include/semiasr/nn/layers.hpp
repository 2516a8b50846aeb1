// semiasr/nn/layers.hpp
//
// Parameterized building blocks shared by the acoustic models and the neural LM.
// Each block owns the parameters under its name prefix, e.g. "ctx.0.attn.q.w".
#pragma once

#include <optional>
#include <string>

#include "semiasr/nn/graph.hpp"
#include "semiasr/nn/params.hpp"

namespace semiasr::nn {

/// y = x W + b with W: [in, out].
void init_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, bool bias = true);
Var linear(Graph& g, Var x, const std::string& name, bool bias = true);

void init_layer_norm(ParameterSet& params, const std::string& name, std::size_t dim);
Var layer_norm(Graph& g, Var x, const std::string& name);

struct TransformerBlockConfig {
  std::size_t dim = 64;
  std::size_t ffn_dim = 128;
  std::size_t heads = 4;
};

void validate(const TransformerBlockConfig& config);

void init_attention(ParameterSet& params, const std::string& name, std::size_t dim);
/// Multi-head attention of `query` rows over `memory` rows. `mask` (if given) is
/// added to the [Tq, Tk] score matrix of every head.
Var attention(Graph& g, Var query, Var memory, const std::string& name, std::size_t heads,
              const Tensor* mask = nullptr);

/// Pre-norm block: x + SelfAttn(LN(x)) [+ CrossAttn(LN(x), memory)] + FFN(LN(x)).
void init_transformer_block(ParameterSet& params, const std::string& name, const TransformerBlockConfig& config,
                            bool cross_attention = false);
Var transformer_block(Graph& g, Var x, const std::string& name, const TransformerBlockConfig& config,
                      const Tensor* self_mask = nullptr, std::optional<Var> memory = std::nullopt);

/// Additive mask with -1e9 above the diagonal.
Tensor causal_mask(std::size_t n);
/// Standard sine/cosine position table [n, dim].
Tensor sinusoidal_positions(std::size_t n, std::size_t dim);

}  // namespace semiasr::nn
