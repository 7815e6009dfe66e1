#include "abfr/optim.hpp"

#include <cmath>
#include <string>

#include "abfr/errors.hpp"

namespace abfr {

AdamState AdamState::for_params(std::span<const Tensor> params, double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.numel(), 0.0);
    state.second_moment.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adam_step(std::span<const Tensor> params, AdamState& state) {
  if (params.size() != state.first_moment.size() || params.size() != state.second_moment.size())
    throw ValidationError("adam_step: " + std::to_string(params.size()) + " parameters but state tracks " +
                          std::to_string(state.first_moment.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.requires_grad())
      throw ValidationError("adam_step: parameter " + std::to_string(i) + " does not require a gradient");
    if (state.first_moment[i].size() != p.numel() || state.second_moment[i].size() != p.numel())
      throw ValidationError("adam_step: moment buffer " + std::to_string(i) + " does not match parameter shape " +
                            shape_string(p.shape()));
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    auto g = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace abfr
