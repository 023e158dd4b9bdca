#include "aerograph/numerics/adam.hpp"

#include <cmath>

#include "aerograph/errors.hpp"

namespace aerograph {

void adam_step(std::span<const NamedTensor> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].value->shape() != grads[i].shape()) {
      throw DimensionError("adam_step: gradient of '" + params[i].name + "' has shape " +
                           shape_string(grads[i].shape()) + ", parameter " + shape_string(params[i].value->shape()));
    }
    if (!grads[i].all_finite()) throw TrainingError("non-finite gradient for parameter '" + params[i].name + "'");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.value->shape());
      state.second_moment.emplace_back(p.value->shape());
    }
  } else if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state was built for a different parameter list");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i].value;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    if (m.shape() != theta.shape()) {
      throw DimensionError("adam_step: moment shape drift for '" + params[i].name + "'");
    }
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      theta[k] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace aerograph
