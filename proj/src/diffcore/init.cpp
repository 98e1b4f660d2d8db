#include "aurecon/diffcore/init.hpp"

#include <cmath>

namespace aurecon::diff {

Tensor random_uniform(Shape shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor random_normal(Shape shape, double mean, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(mean, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor he_normal(Shape shape, Rng& rng) {
  const double fan_in = static_cast<double>(shape_numel(shape) / shape.front());
  return random_normal(std::move(shape), 0.0, std::sqrt(2.0 / fan_in), rng);
}

}  // namespace aurecon::diff
