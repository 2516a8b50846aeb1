// semiasr/nn/adam.hpp
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "semiasr/nn/params.hpp"

namespace semiasr::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;

  explicit OptimizerState(AdamConfig c = {}) : config(c) {}
};

/// One Adam update with bias correction over every non-frozen parameter.
/// Throws NonFiniteError (and leaves parameters and state untouched) when any
/// gradient is NaN or infinite.
void adam_step(ParameterSet& params, OptimizerState& state);

/// Rescales gradients so their global norm is at most `max_norm`. Returns the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

}  // namespace semiasr::nn
