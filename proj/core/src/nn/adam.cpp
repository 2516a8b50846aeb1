// nn/adam.cpp
#include "semiasr/nn/adam.hpp"

#include <cmath>

#include "semiasr/error.hpp"

namespace semiasr::nn {

void adam_step(ParameterSet& params, OptimizerState& state) {
  for (const auto& [name, p] : params.entries()) {
    if (p.frozen) continue;
    if (!p.grad.all_finite()) throw NonFiniteError("adam_step", "non-finite gradient for parameter '" + name + "'");
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (auto& [name, p] : params.entries()) {
    if (p.frozen) continue;
    auto [m_it, m_new] = state.first_moment.try_emplace(name, Tensor(p.value.shape(), 0.0));
    auto [v_it, v_new] = state.second_moment.try_emplace(name, Tensor(p.value.shape(), 0.0));
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    if (!m.same_shape(p.value)) throw ShapeError("adam_step: moment shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double mhat = m[i] / correction1;
      const double vhat = v[i] / correction2;
      p.value[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) params.scale_grads(max_norm / norm);
  return norm;
}

}  // namespace semiasr::nn
