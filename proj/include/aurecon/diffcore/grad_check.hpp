#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "aurecon/diffcore/param_store.hpp"

namespace aurecon::diff {

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  /// 0 checks every element; otherwise a seeded sample of this many per parameter.
  std::size_t max_elements_per_param = 0;
  std::uint64_t seed = 0;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Elements sitting within eps of a non-differentiable point (relu/max/abs
  /// kinks) where the analytic gradient matches a one-sided difference.
  std::size_t kinks_skipped = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  bool passed = true;
};

using LossClosure = std::function<Tensor()>;
using NamedStores = std::vector<std::pair<std::string, ParamStore*>>;

/// Compares reverse-mode gradients of `loss` against central finite
/// differences, element by element. The relative error of one element is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
///
/// The closure must be deterministic. Throws NonFiniteError naming the
/// parameter if a perturbed evaluation is not finite.
GradCheckReport grad_check(const LossClosure& loss, ParamStore& params, const GradCheckOptions& opts);
GradCheckReport grad_check(const LossClosure& loss, const NamedStores& stores,
                           const GradCheckOptions& opts);

}  // namespace aurecon::diff
