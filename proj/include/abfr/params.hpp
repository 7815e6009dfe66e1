#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "abfr/checkpoint.hpp"
#include "abfr/rng.hpp"
#include "abfr/tensor.hpp"

namespace abfr {

using ParamList = std::vector<NamedTensor>;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual fan-in scaling for
// affine maps.
inline Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = (2.0 * rng.uniform() - 1.0) * bound;
  return Tensor(std::move(shape), std::move(v), true);
}

inline Tensor normal_init(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(v), true);
}

inline Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }
inline Tensor ones_param(Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

}  // namespace abfr
