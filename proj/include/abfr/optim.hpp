#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "abfr/tensor.hpp"

namespace abfr {

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 0.0009;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Zero moments shaped like params.
  static AdamState for_params(std::span<const Tensor> params, double learning_rate = 0.0009);
};

// One bias-corrected Adam update of every parameter from its accumulated
// gradient. Parameters must line up one-to-one with the state's moments.
void adam_step(std::span<const Tensor> params, AdamState& state);

}  // namespace abfr
