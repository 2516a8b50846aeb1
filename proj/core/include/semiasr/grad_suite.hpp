// semiasr/grad_suite.hpp
//
// Finite-difference checks of every differentiable graph op and of the small
// composite models (wav2vec with the contrastive objective, CTC head, seq2seq,
// neural LM). Everything runs in double precision.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "semiasr/nn/grad_check.hpp"

namespace semiasr {

struct GradSuiteEntry {
  std::string name;
  nn::GradCheckResult result;
  double seconds = 0.0;
  bool passed = false;
};

std::vector<std::string> gradient_suite_names();

/// Runs the cases whose name contains `filter` (all when empty).
std::vector<GradSuiteEntry> run_gradient_suite(double tolerance = 1e-4, const std::string& filter = "",
                                               const std::function<void(const GradSuiteEntry&)>& on_entry = {});

}  // namespace semiasr
