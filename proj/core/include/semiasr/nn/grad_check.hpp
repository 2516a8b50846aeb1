// semiasr/nn/grad_check.hpp
#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "semiasr/nn/graph.hpp"

namespace semiasr::nn {

struct GradCheckOptions {
  double step = 1e-4;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double denominator_floor = 1e-3;
  /// 0 checks every entry; otherwise a seeded random subset of this size per parameter.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

/// Compares back-propagated gradients of `loss_fn` against central differences
/// at the current parameter values. `loss_fn` must build the same graph on every
/// call (freeze any noise it draws). Non-finite intermediates and hard ops on the
/// differentiated path surface as NonFiniteError / NonDifferentiableError.
GradCheckResult grad_check(const std::function<Var(Graph&)>& loss_fn, ParameterSet& params,
                           const GradCheckOptions& options = {});

}  // namespace semiasr::nn
