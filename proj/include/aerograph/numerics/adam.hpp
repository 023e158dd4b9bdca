#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aerograph/numerics/tensor.hpp"

namespace aerograph {

struct NamedTensor {
  std::string name;
  Tensor* value = nullptr;
};

struct AdamState {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// One Adam update with bias-corrected moments:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
/// Moments are created lazily on the first call. Throws TrainingError naming
/// the parameter if a gradient is not finite, DimensionError on shape drift.
void adam_step(std::span<const NamedTensor> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace aerograph
