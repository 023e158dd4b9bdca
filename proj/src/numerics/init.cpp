#include "aerograph/numerics/init.hpp"

#include <cmath>

#include "aerograph/errors.hpp"

namespace aerograph {

double kaiming_uniform_bound(std::size_t fan_in) {
  if (fan_in == 0) throw ContractError("kaiming_uniform_init: fan_in must be positive");
  return std::sqrt(6.0 / static_cast<double>(fan_in));
}

Tensor kaiming_uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng) {
  return uniform_init(shape, kaiming_uniform_bound(fan_in), rng);
}

Tensor uniform_init(const Shape& shape, double bound, Rng& rng) {
  if (!(bound > 0.0) || !std::isfinite(bound)) throw ContractError("uniform_init: bound must be positive");
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor out(shape);
  for (double& v : out.values()) v = dist(rng);
  return out;
}

}  // namespace aerograph
