#include "aurecon/diffcore/optimizer.hpp"

#include <cmath>
#include <string>

#include "aurecon/common/error.hpp"

namespace aurecon::diff {

UpdateRule parse_update_rule(std::string_view name) {
  if (name == "sgd") return UpdateRule::sgd;
  if (name == "adam") return UpdateRule::adam;
  throw Error("unknown update rule '" + std::string(name) + "'");
}

void optimizer_step(ParamStore& params, const OptimizerConfig& cfg, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error("learning rate must be finite and >= 0");
  for (auto& e : params.entries()) {
    if (!e.value.requires_grad()) continue;
    if (!e.value.has_grad()) throw Error("parameter '" + e.name + "' has no gradient");
  }
  for (auto& e : params.entries()) {
    if (!e.value.requires_grad()) continue;
    auto p = e.value.mutable_data();
    const auto g = e.value.grad();
    auto& st = e.state;
    ++st.step;
    if (cfg.rule == UpdateRule::sgd) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
      continue;
    }
    if (st.m.size() != p.size()) {
      st.m.assign(p.size(), 0.0);
      st.v.assign(p.size(), 0.0);
    }
    const double t = static_cast<double>(st.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
      st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = st.m[i] / c1;
      const double vhat = st.v[i] / c2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace aurecon::diff
