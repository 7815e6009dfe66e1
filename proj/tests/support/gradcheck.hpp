#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "abfr/rng.hpp"
#include "abfr/tensor.hpp"

namespace abfr::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Compares one backward pass against central differences on every entry of
// every input. Non-scalar outputs are contracted with fixed random weights so
// each output entry contributes. Returns the largest per-input
// ||analytic - numeric|| / (||analytic|| + ||numeric||).
inline double gradcheck(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs, double h = 1e-5,
                        std::uint64_t seed = 99) {
  const Tensor probe = f();
  Rng rng(seed);
  const Tensor weights = random_tensor(probe.shape(), rng, 1.0, false);
  auto loss = [&] { return sum(mul(f(), weights)); };

  for (const auto& x : inputs) x.zero_grad();
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& x : inputs) analytic.emplace_back(x.grad().begin(), x.grad().end());

  double worst = 0.0;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    auto data = inputs[n].mutable_data();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss().item();
      data[i] = saved - h;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic[n][i] - numeric) * (analytic[n][i] - numeric);
      a2 += analytic[n][i] * analytic[n][i];
      n2 += numeric * numeric;
    }
    const double denom = std::sqrt(a2) + std::sqrt(n2);
    if (denom > 1e-300) worst = std::max(worst, std::sqrt(diff2) / denom);
  }
  return worst;
}

}  // namespace abfr::testing
