// semiasr/nn/params.hpp
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "semiasr/nn/tensor.hpp"

namespace semiasr::nn {

struct Parameter {
  Tensor value;
  Tensor grad;
  bool frozen = false;
};

/// Named parameters of a model. Iteration order is the lexicographic name order,
/// which fixes the order of every reduction over parameters.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::uint64_t seed) : seed_(seed), rng_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& rng() { return rng_; }

  /// Adds a parameter; throws if the name is taken.
  Parameter& add(const std::string& name, Tensor value);
  /// Weight matrix [fan_in, fan_out] drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Parameter& add_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out);
  /// Zero-initialized [1, n] bias.
  Parameter& add_bias(const std::string& name, std::size_t n);
  Parameter& add_constant(const std::string& name, std::vector<std::size_t> shape, double value);
  Parameter& add_uniform(const std::string& name, std::vector<std::size_t> shape, double bound);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  void remove_prefix(const std::string& prefix);

  std::map<std::string, Parameter>& entries() { return params_; }
  const std::map<std::string, Parameter>& entries() const { return params_; }
  std::vector<std::string> names() const;
  std::size_t scalar_count() const;

  void zero_grad();
  /// Freezes (or unfreezes) every parameter whose name starts with `prefix`.
  void set_frozen(const std::string& prefix, bool frozen);
  /// Global L2 norm of all gradients of non-frozen parameters.
  double grad_norm() const;
  void scale_grads(double factor);

  /// Copies values of every parameter in `other` that exists here with the same shape.
  /// Returns the number of copied tensors.
  std::size_t load_matching(const ParameterSet& other);

 private:
  std::uint64_t seed_ = 0;
  std::mt19937_64 rng_{0};
  std::map<std::string, Parameter> params_;
};

}  // namespace semiasr::nn
