#include "aurecon/losses/losses.hpp"

#include <cmath>

#include "aurecon/common/error.hpp"
#include "aurecon/diffcore/ops.hpp"

namespace aurecon::loss {

namespace d = aurecon::diff;

void LossWeights::validate() const {
  const std::array<std::pair<const char*, double>, 6> all = {
      {{"c", c}, {"l", l}, {"adl", adl}, {"adf", adf}, {"au", au}, {"fl", fl}}};
  for (const auto& [name, v] : all) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(std::string("loss weight ") + name + " must be finite and >= 0, got " + std::to_string(v));
    }
  }
}

nlohmann::json LossWeights::to_json() const {
  return {{"c", c}, {"l", l}, {"adl", adl}, {"adf", adf}, {"au", au}, {"fl", fl}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  w.c = j.value("c", w.c);
  w.l = j.value("l", w.l);
  w.adl = j.value("adl", w.adl);
  w.adf = j.value("adf", w.adf);
  w.au = j.value("au", w.au);
  w.fl = j.value("fl", w.fl);
  w.validate();
  return w;
}

std::vector<double> au_class_weights(const std::vector<double>& occurrence_rates) {
  if (occurrence_rates.empty()) throw Error("au_class_weights: no AUs");
  std::vector<double> inv;
  inv.reserve(occurrence_rates.size());
  for (std::size_t i = 0; i < occurrence_rates.size(); ++i) {
    const double r = occurrence_rates[i];
    if (!(r > 0.0 && r <= 1.0)) {
      throw Error("au_class_weights: AU " + std::to_string(i) + " has occurrence rate " + std::to_string(r) +
                  "; every AU needs at least one positive training sample");
    }
    inv.push_back(1.0 / r);
  }
  double mean = 0.0;
  for (double v : inv) mean += v;
  mean /= static_cast<double>(inv.size());
  for (double& v : inv) v /= mean;
  return inv;
}

Tensor landmark_loss(const Tensor& pred, const LandmarkTarget& target) {
  if (pred.shape() != target.coords.shape()) {
    throw ShapeError("landmark_loss: prediction " + d::shape_str(pred.shape()) + " vs target " +
                     d::shape_str(target.coords.shape()));
  }
  const std::size_t n = pred.dim(0);
  if (target.iod.size() != n) {
    throw ShapeError("landmark_loss: " + std::to_string(target.iod.size()) + " inter-ocular distances for batch " +
                     std::to_string(n));
  }
  std::vector<double> inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double iod = target.iod[i];
    if (!(iod > 0.0)) throw Error("landmark_loss: inter-ocular distance must be > 0, got " + std::to_string(iod));
    inv[i] = 1.0 / (2.0 * iod * iod);
  }
  auto per_sample = d::sum_per_sample(d::square(d::sub(pred, target.coords.detach())));
  return d::mean(d::mul(per_sample, Tensor::from({n}, std::move(inv))));
}

Tensor alignment_pair_loss(const Tensor& reconstructed, const Tensor& original, const nets::Projector& p_rec,
                           const nets::Projector& p_orig) {
  auto diff = d::sub(p_rec.forward(reconstructed), p_orig.forward(original));
  if (diff.rank() != 4) throw ShapeError("alignment_pair_loss: expected (N, C, H, W), got " + d::shape_str(diff.shape()));
  const double denom = static_cast<double>(diff.dim(0) * diff.dim(2) * diff.dim(3));
  return d::scale(d::sum(d::abs(diff)), 1.0 / denom);
}

Tensor contrastive_alignment_loss(const nets::FeatureBundle& bundle, const std::vector<nets::Projector>& projectors,
                                  const PairMask& mask) {
  if (projectors.size() != 2 * nets::kSupervisorPairs) {
    throw Error("contrastive_alignment_loss: need 12 projectors, got " + std::to_string(projectors.size()));
  }
  Tensor total;
  for (std::size_t i = 0; i < nets::kSupervisorPairs; ++i) {
    if (!mask[i]) continue;
    auto [rec, orig] = bundle.pair(i);
    if (!rec->defined() || !orig->defined()) {
      throw Error("contrastive_alignment_loss: supervisor pair " + nets::FeatureBundle::pair_name(i) + " is missing");
    }
    auto term = alignment_pair_loss(*rec, *orig, projectors[2 * i], projectors[2 * i + 1]);
    total = total.defined() ? d::add(total, term) : term;
  }
  return total.defined() ? total : Tensor::scalar(0.0);
}

Tensor au_loss(const Tensor& probs, const AuTarget& target) {
  if (probs.shape() != target.labels.shape() || probs.rank() != 2) {
    throw ShapeError("au_loss: probabilities " + d::shape_str(probs.shape()) + " vs labels " +
                     d::shape_str(target.labels.shape()));
  }
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  if (target.class_weights.size() != k) {
    throw ShapeError("au_loss: " + std::to_string(target.class_weights.size()) + " class weights for " +
                     std::to_string(k) + " AUs");
  }
  std::vector<double> w(n * k), y(target.labels.data().begin(), target.labels.data().end()), not_y(n * k);
  for (std::size_t i = 0; i < n * k; ++i) {
    w[i] = target.class_weights[i % k];
    not_y[i] = 1.0 - y[i];
  }
  auto p = d::clamp(probs, kProbClamp, 1.0 - kProbClamp);
  auto pos = d::mul(d::log(p), Tensor::from({n, k}, std::move(y)));
  auto neg = d::mul(d::log(d::add_scalar(d::scale(p, -1.0), 1.0)), Tensor::from({n, k}, std::move(not_y)));
  auto weighted = d::mul(d::add(pos, neg), Tensor::from({n, k}, std::move(w)));
  return d::scale(d::sum(weighted), -1.0 / static_cast<double>(n * k));
}

Tensor landmark_feature_loss(const nets::PooledHead& dl, const Tensor& f_sl, const Tensor& f_tl,
                             const LandmarkTarget& source, const LandmarkTarget& target) {
  if (!target.coords.defined() || target.iod.empty()) {
    throw Error("landmark_feature_loss: target-domain landmark pseudo-labels are missing");
  }
  return d::add(landmark_loss(nets::d_landmark_forward(dl, f_sl), source),
                landmark_loss(nets::d_landmark_forward(dl, f_tl), target));
}

namespace {

Tensor mean_face_batch(const std::vector<double>& mean_face, const Tensor& like) {
  if (mean_face.empty()) throw Error("adversarial_landmark_losses: canonical mean face is not configured");
  const std::size_t n = like.dim(0), m = like.dim(1);
  if (mean_face.size() != m) {
    throw ShapeError("adversarial_landmark_losses: mean face has " + std::to_string(mean_face.size()) +
                     " values, predictions have " + std::to_string(m));
  }
  std::vector<double> rep(n * m);
  for (std::size_t i = 0; i < n * m; ++i) rep[i] = mean_face[i % m];
  return Tensor::from({n, m}, std::move(rep));
}

Tensor squared_gap(const Tensor& scores, double label) { return d::mean(d::square(d::add_scalar(scores, -label))); }

}  // namespace

AdversarialPair adversarial_landmark_losses(const nets::PooledHead& dl, const Tensor& f_sb, const Tensor& f_tb,
                                            const LandmarkTarget& source, const LandmarkTarget& target,
                                            const std::vector<double>& mean_face) {
  auto pred_s = nets::d_landmark_forward(dl, f_sb);
  auto pred_t = nets::d_landmark_forward(dl, f_tb);
  auto g = d::scale(d::add(landmark_loss(pred_s, source.with_coords(mean_face_batch(mean_face, pred_s))),
                           landmark_loss(pred_t, target.with_coords(mean_face_batch(mean_face, pred_t)))),
                    0.5);
  auto dstep = d::scale(d::add(landmark_loss(nets::d_landmark_forward(dl, f_sb.detach()), source),
                               landmark_loss(nets::d_landmark_forward(dl, f_tb.detach()), target)),
                        0.5);
  return {dstep, g};
}

AdversarialPair adversarial_domain_losses(const nets::PooledHead& dd, const nets::FeatureBundle& bundle) {
  auto score = [&](const Tensor& f) { return nets::d_domain_forward(dd, f); };
  Tensor dstep = squared_gap(score(bundle.F_s.detach()), 1.0);
  dstep = d::add(dstep, squared_gap(score(bundle.F_t.detach()), 0.0));
  dstep = d::add(dstep, squared_gap(score(bundle.F_sltb.detach()), 0.0));
  dstep = d::add(dstep, squared_gap(score(bundle.F_sbtl.detach()), 1.0));
  auto g = d::add(squared_gap(score(bundle.F_sltb), 0.0), squared_gap(score(bundle.F_sbtl), 1.0));
  return {dstep, g};
}

const std::array<std::string, 6>& LossComponents::names() {
  static const std::array<std::string, 6> n = {"L_c", "L_l", "L_adl", "L_adf", "L_au", "L_fl"};
  return n;
}

Tensor total_loss(const LossWeights& w, const LossComponents& parts) {
  w.validate();
  const std::array<double, 6> weights = {w.c, w.l, w.adl, w.adf, w.au, w.fl};
  const auto comps = parts.all();
  Tensor total;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const Tensor& t = *comps[i];
    if (!t.defined()) {
      if (weights[i] != 0.0) throw Error("total_loss: component " + LossComponents::names()[i] + " is missing");
      continue;
    }
    if (t.numel() != 1) throw ShapeError("total_loss: component " + LossComponents::names()[i] + " is not a scalar");
    if (!std::isfinite(t.item())) {
      throw NonFiniteError("total_loss: component " + LossComponents::names()[i] + " is not finite");
    }
    auto term = d::scale(t, weights[i]);
    total = total.defined() ? d::add(total, term) : term;
  }
  return total.defined() ? total : Tensor::scalar(0.0);
}

}  // namespace aurecon::loss
