#include "aurecon/diffcore/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "aurecon/common/error.hpp"

namespace aurecon::diff {

namespace {

double rel_error(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / denom;
}

double eval(const LossClosure& loss, const std::string& name) {
  double v = 0.0;
  try {
    v = loss().item();
  } catch (const NonFiniteError&) {
    throw NonFiniteError("non-finite loss while perturbing parameter '" + name + "'");
  }
  if (!std::isfinite(v)) throw NonFiniteError("non-finite loss while perturbing parameter '" + name + "'");
  return v;
}

}  // namespace

GradCheckReport grad_check(const LossClosure& loss, ParamStore& params, const GradCheckOptions& opts) {
  return grad_check(loss, NamedStores{{"", &params}}, opts);
}

GradCheckReport grad_check(const LossClosure& loss, const NamedStores& stores,
                           const GradCheckOptions& opts) {
  for (const auto& [prefix, store] : stores) store->zero_grad();
  {
    auto l = loss();
    l.backward();
  }

  std::mt19937_64 rng(opts.seed);
  GradCheckReport report;
  for (const auto& [prefix, store] : stores) {
    for (auto& e : store->entries()) {
      ParamCheck pc;
      pc.name = prefix.empty() ? e.name : prefix + "/" + e.name;
      const std::vector<double> analytic(e.value.grad().begin(), e.value.grad().end());

      std::vector<std::size_t> idx(e.value.numel());
      std::iota(idx.begin(), idx.end(), 0);
      if (opts.max_elements_per_param > 0 && idx.size() > opts.max_elements_per_param) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(opts.max_elements_per_param);
        std::sort(idx.begin(), idx.end());
      }

      auto data = e.value.mutable_data();
      const double f0 = idx.empty() ? 0.0 : eval(loss, pc.name);
      for (auto i : idx) {
        const double orig = data[i];
        data[i] = orig + opts.eps;
        const double fp = eval(loss, pc.name);
        data[i] = orig - opts.eps;
        const double fm = eval(loss, pc.name);
        data[i] = orig;

        const double numeric = (fp - fm) / (2.0 * opts.eps);
        double err = rel_error(analytic[i], numeric);
        if (err > opts.tol) {
          const double right = (fp - f0) / opts.eps;
          const double left = (f0 - fm) / opts.eps;
          const bool one_sided_disagree = rel_error(left, right) > 10.0 * opts.tol;
          const bool matches_side =
              std::min(rel_error(analytic[i], right), rel_error(analytic[i], left)) <= 1e-3;
          if (one_sided_disagree && matches_side) {
            ++pc.kinks_skipped;
            continue;
          }
        }
        pc.max_rel_error = std::max(pc.max_rel_error, err);
        ++pc.checked;
      }
      report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
      report.params.push_back(std::move(pc));
    }
  }
  report.passed = report.max_rel_error <= opts.tol;
  for (const auto& [prefix, store] : stores) store->zero_grad();
  return report;
}

}  // namespace aurecon::diff
