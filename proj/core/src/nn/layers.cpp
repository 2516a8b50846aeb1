// nn/layers.cpp
#include "semiasr/nn/layers.hpp"

#include <cmath>

#include "semiasr/error.hpp"

namespace semiasr::nn {

void init_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, bool bias) {
  params.add_weight(name + ".w", in, out);
  if (bias) params.add_bias(name + ".b", out);
}

Var linear(Graph& g, Var x, const std::string& name, bool bias) {
  Var y = matmul(x, g.param(name + ".w"));
  return bias ? add_row(y, g.param(name + ".b")) : y;
}

void init_layer_norm(ParameterSet& params, const std::string& name, std::size_t dim) {
  params.add_constant(name + ".g", {1, dim}, 1.0);
  params.add_constant(name + ".b", {1, dim}, 0.0);
}

Var layer_norm(Graph& g, Var x, const std::string& name) {
  return layer_norm_rows(x, g.param(name + ".g"), g.param(name + ".b"));
}

void validate(const TransformerBlockConfig& config) {
  if (config.heads == 0 || config.dim % config.heads != 0) {
    throw ConfigError("heads", "model dim " + std::to_string(config.dim) + " is not divisible by " +
                                   std::to_string(config.heads) + " heads");
  }
}

void init_attention(ParameterSet& params, const std::string& name, std::size_t dim) {
  init_linear(params, name + ".q", dim, dim);
  init_linear(params, name + ".k", dim, dim);
  init_linear(params, name + ".v", dim, dim);
  init_linear(params, name + ".o", dim, dim);
}

Var attention(Graph& g, Var query, Var memory, const std::string& name, std::size_t heads, const Tensor* mask) {
  const std::size_t dim = query.cols();
  if (memory.cols() != dim) {
    throw ShapeError("attention: query dim " + std::to_string(dim) + " differs from memory dim " +
                     std::to_string(memory.cols()));
  }
  if (mask && (mask->rows() != query.rows() || mask->cols() != memory.rows())) {
    throw ShapeError("attention: mask shape " + mask->shape_string() + " does not match scores");
  }
  const std::size_t dh = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Var q = linear(g, query, name + ".q");
  Var k = linear(g, memory, name + ".k");
  Var v = linear(g, memory, name + ".v");
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = heads == 1 ? k : slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = heads == 1 ? v : slice_cols(v, h * dh, (h + 1) * dh);
    Var scores = scale(matmul_nt(qh, kh), inv_sqrt);
    if (mask) scores = add_const(scores, *mask);
    outs.push_back(matmul(softmax_rows(scores), vh));
  }
  Var ctx = heads == 1 ? outs.front() : concat_cols(outs);
  return linear(g, ctx, name + ".o");
}

void init_transformer_block(ParameterSet& params, const std::string& name, const TransformerBlockConfig& config,
                            bool cross_attention) {
  validate(config);
  init_layer_norm(params, name + ".ln1", config.dim);
  init_attention(params, name + ".attn", config.dim);
  if (cross_attention) {
    init_layer_norm(params, name + ".lnx", config.dim);
    init_attention(params, name + ".xattn", config.dim);
  }
  init_layer_norm(params, name + ".ln2", config.dim);
  init_linear(params, name + ".ff1", config.dim, config.ffn_dim);
  init_linear(params, name + ".ff2", config.ffn_dim, config.dim);
}

Var transformer_block(Graph& g, Var x, const std::string& name, const TransformerBlockConfig& config,
                      const Tensor* self_mask, std::optional<Var> memory) {
  if (x.cols() != config.dim) {
    throw ShapeError("transformer_block " + name + ": input dim " + std::to_string(x.cols()) +
                     " != model dim " + std::to_string(config.dim));
  }
  Var h = layer_norm(g, x, name + ".ln1");
  x = add(x, attention(g, h, h, name + ".attn", config.heads, self_mask));
  if (memory) {
    Var hx = layer_norm(g, x, name + ".lnx");
    x = add(x, attention(g, hx, *memory, name + ".xattn", config.heads));
  }
  Var f = layer_norm(g, x, name + ".ln2");
  f = linear(g, gelu(linear(g, f, name + ".ff1")), name + ".ff2");
  return add(x, f);
}

Tensor causal_mask(std::size_t n) {
  Tensor m = Tensor::matrix(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = -1e9;
  return m;
}

Tensor sinusoidal_positions(std::size_t n, std::size_t dim) {
  Tensor p = Tensor::matrix(n, dim, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      p(t, i) = (i % 2 == 0) ? std::sin(static_cast<double>(t) * rate) : std::cos(static_cast<double>(t) * rate);
    }
  }
  return p;
}

}  // namespace semiasr::nn
