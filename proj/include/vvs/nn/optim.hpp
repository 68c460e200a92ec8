#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vvs/nn/tensor.hpp"

namespace vvs::nn {

struct AdamState {
  std::size_t step = 0;
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
};

// One bias-corrected Adam update over `params`, then zeroes their gradients.
// Parameters without a recorded gradient are treated as having zero gradient.
// Throws TrainingError naming the parameter if any gradient is NaN/Inf.
void adam_step(const ParameterList& params, AdamState& state);

void zero_grad(const ParameterList& params);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // entries dropped by the kink test
};

// Compares autodiff gradients of the scalar `f` against central differences
// with step `h`. Error per entry is |a-n| / max(1, |a|, |n|).
// When `max_entries_per_param` is non-zero, only that many entries per
// parameter (chosen with `rng`) are probed.
// A positive `kink_tolerance` skips entries whose forward and backward
// differences disagree by more than that (relative), i.e. where a ReLU or max
// switches inside [x-h, x+h] and no finite difference is meaningful.
GradCheckResult grad_check(const std::function<Tensor()>& f, const ParameterList& params, float h = 1e-3f,
                           std::size_t max_entries_per_param = 0, std::mt19937_64* rng = nullptr,
                           double kink_tolerance = 0.0);

}  // namespace vvs::nn
