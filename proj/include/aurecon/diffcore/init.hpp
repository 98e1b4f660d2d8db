#pragma once

#include <random>

#include "aurecon/diffcore/tensor.hpp"

namespace aurecon::diff {

using Rng = std::mt19937_64;

Tensor random_uniform(Shape shape, double lo, double hi, Rng& rng);
Tensor random_normal(Shape shape, double mean, double stddev, Rng& rng);

/// He-normal init for a weight whose fan-in is the product of all but the first extent.
Tensor he_normal(Shape shape, Rng& rng);

}  // namespace aurecon::diff
