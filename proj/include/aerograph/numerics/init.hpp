#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "aerograph/numerics/tensor.hpp"

namespace aerograph {

using Rng = std::mt19937_64;

/// He/Kaiming uniform bound for ReLU layers: sqrt(6 / fan_in).
double kaiming_uniform_bound(std::size_t fan_in);

/// U(-b, b) with b = kaiming_uniform_bound(fan_in). Throws ContractError for
/// fan_in == 0.
Tensor kaiming_uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng);

/// U(-bound, bound).
Tensor uniform_init(const Shape& shape, double bound, Rng& rng);

}  // namespace aerograph
