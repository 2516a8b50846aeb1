// nn/grad_check.cpp
#include "semiasr/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace semiasr::nn {

namespace {
double evaluate(const std::function<Var(Graph&)>& loss_fn, ParameterSet& params) {
  Graph g(&params);
  return loss_fn(g).value().item();
}
}  // namespace

GradCheckResult grad_check(const std::function<Var(Graph&)>& loss_fn, ParameterSet& params,
                           const GradCheckOptions& options) {
  params.zero_grad();
  {
    Graph g(&params);
    Var loss = loss_fn(g);
    g.backward(loss);
  }
  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (auto& [name, p] : params.entries()) {
    if (p.frozen) continue;
    std::vector<std::size_t> idx(p.value.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_entries_per_param > 0 && idx.size() > options.max_entries_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.max_entries_per_param);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      const double original = p.value[i];
      p.value[i] = original + options.step;
      const double up = evaluate(loss_fn, params);
      p.value[i] = original - options.step;
      const double down = evaluate(loss_fn, params);
      p.value[i] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_relative_error || result.entries_checked == 1) {
        result.max_relative_error = rel;
        result.worst_parameter = name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace semiasr::nn
