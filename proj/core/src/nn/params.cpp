// nn/params.cpp
#include "semiasr/nn/params.hpp"

#include <cmath>

#include "semiasr/error.hpp"

namespace semiasr::nn {

Parameter& ParameterSet::add(const std::string& name, Tensor value) {
  if (params_.count(name)) throw Error("parameter '" + name + "' already exists");
  Parameter p;
  p.grad = Tensor(value.shape(), 0.0);
  p.value = std::move(value);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParameterSet::add_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return add_uniform(name, {fan_in, fan_out}, bound);
}

Parameter& ParameterSet::add_bias(const std::string& name, std::size_t n) {
  return add(name, Tensor::matrix(1, n, 0.0));
}

Parameter& ParameterSet::add_constant(const std::string& name, std::vector<std::size_t> shape, double value) {
  return add(name, Tensor(std::move(shape), value));
}

Parameter& ParameterSet::add_uniform(const std::string& name, std::vector<std::size_t> shape, double bound) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = dist(rng_);
  return add(name, std::move(t));
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

void ParameterSet::remove_prefix(const std::string& prefix) {
  for (auto it = params_.begin(); it != params_.end();) {
    if (it->first.rfind(prefix, 0) == 0) {
      it = params_.erase(it);
    } else {
      ++it;
    }
  }
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [_, p] : params_) p.grad.fill(0.0);
}

void ParameterSet::set_frozen(const std::string& prefix, bool frozen) {
  for (auto& [name, p] : params_) {
    if (name.rfind(prefix, 0) == 0) p.frozen = frozen;
  }
}

double ParameterSet::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, p] : params_) {
    if (p.frozen) continue;
    for (double g : p.grad.values()) s += g * g;
  }
  return std::sqrt(s);
}

void ParameterSet::scale_grads(double factor) {
  for (auto& [_, p] : params_) {
    for (double& g : p.grad.values()) g *= factor;
  }
}

std::size_t ParameterSet::load_matching(const ParameterSet& other) {
  std::size_t n = 0;
  for (const auto& [name, src] : other.params_) {
    auto it = params_.find(name);
    if (it == params_.end() || !it->second.value.same_shape(src.value)) continue;
    it->second.value = src.value;
    ++n;
  }
  return n;
}

}  // namespace semiasr::nn
