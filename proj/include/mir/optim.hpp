#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mir/tensor.hpp"

namespace mir::optim {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first and second moments, sized on first use. One state
// object owns one parameter list; lists must keep a stable order.
template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  i64 step = 0;
};

struct StepReport {
  bool applied = true;
  std::string skipped_param;  // first parameter with a non-finite gradient
};

// Bias-corrected Adam update over a named parameter list. A parameter whose
// gradient was never touched this step contributes zeros. Any non-finite
// gradient entry skips the whole step and reports the offending parameter.
template <typename T>
StepReport adam_step(std::vector<std::pair<std::string, Tensor<T>>>& params, AdamState<T>& state,
                     const AdamConfig& cfg);

}  // namespace mir::optim
