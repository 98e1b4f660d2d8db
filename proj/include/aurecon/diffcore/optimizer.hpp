#pragma once

#include <string_view>

#include "aurecon/diffcore/param_store.hpp"

namespace aurecon::diff {

enum class UpdateRule { sgd, adam };

UpdateRule parse_update_rule(std::string_view name);

struct OptimizerConfig {
  UpdateRule rule = UpdateRule::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Applies one update to every parameter of `params` that requires a
/// gradient, using the current gradient buffers. Gradients are left intact.
/// Throws if a trainable parameter has no gradient buffer.
void optimizer_step(ParamStore& params, const OptimizerConfig& cfg, double lr);

}  // namespace aurecon::diff
