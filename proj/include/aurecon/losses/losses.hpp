#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aurecon/netblocks/network.hpp"

namespace aurecon::loss {

using diff::Tensor;

struct LossWeights {
  double c = 100.0;
  double l = 0.6;
  double adl = 400.0;
  double adf = 1.2;
  double au = 1.0;
  double fl = 0.1;

  /// Throws if any weight is negative or non-finite.
  void validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
};

/// Batched landmark targets: coords is (N, 2 * n_land) in normalized image
/// units, iod holds one inter-ocular distance per sample in the same units.
struct LandmarkTarget {
  Tensor coords;
  std::vector<double> iod;

  /// Same inter-ocular distances, different coordinates.
  LandmarkTarget with_coords(Tensor other) const { return {std::move(other), iod}; }
};

/// Batched AU labels (N, n_au) in {0, 1}, plus per-AU class weights.
struct AuTarget {
  Tensor labels;
  std::vector<double> class_weights;
};

/// Inverse-frequency weights normalised to mean 1. Every rate must lie in (0, 1].
std::vector<double> au_class_weights(const std::vector<double>& occurrence_rates);

/// Mean over the batch of sum_i ||pred_i - target_i||^2 / (2 d^2).
Tensor landmark_loss(const Tensor& pred, const LandmarkTarget& target);

/// Which of the six supervisor pairs take part in the alignment loss.
using PairMask = std::array<bool, nets::kSupervisorPairs>;
inline constexpr PairMask kAllPairs = {true, true, true, true, true, true};
inline constexpr PairMask kCyclePairsOnly = {true, true, false, false, false, false};

/// One pair's term: per-location channel-summed L1 between the projected
/// sides, divided by h * w and averaged over the batch.
Tensor alignment_pair_loss(const Tensor& reconstructed, const Tensor& original, const nets::Projector& p_rec,
                           const nets::Projector& p_orig);

/// Sum of alignment_pair_loss over the pairs enabled in `mask`. Projector
/// for pair i, side j is projectors[2 * i + j].
Tensor contrastive_alignment_loss(const nets::FeatureBundle& bundle, const std::vector<nets::Projector>& projectors,
                                  const PairMask& mask = kAllPairs);

inline constexpr double kProbClamp = 1e-7;

/// Weighted multi-label cross entropy, averaged over AUs and batch. Probs are
/// clamped to [1e-7, 1 - 1e-7] before the logs.
Tensor au_loss(const Tensor& probs, const AuTarget& target);

/// Landmark regression from landmark features of both domains through D_l.
Tensor landmark_feature_loss(const nets::PooledHead& dl, const Tensor& f_sl, const Tensor& f_tl,
                             const LandmarkTarget& source, const LandmarkTarget& target);

struct AdversarialPair {
  Tensor d_step;
  Tensor g_step;
};

/// D_l recovering landmarks from (detached) background features, and the
/// generator pushing those features toward the mean face. Both members are
/// averaged over the two domains. `mean_face` has 2 * n_land entries.
AdversarialPair adversarial_landmark_losses(const nets::PooledHead& dl, const Tensor& f_sb, const Tensor& f_tb,
                                            const LandmarkTarget& source, const LandmarkTarget& target,
                                            const std::vector<double>& mean_face);

/// Least-squares domain adversary. Real features go to their domain label
/// (source 1, target 0); reconstructions are labelled by the domain of their
/// background (F_sltb 0, F_sbtl 1).
AdversarialPair adversarial_domain_losses(const nets::PooledHead& dd, const nets::FeatureBundle& bundle);

/// Loss terms in objective order. Undefined entries count as absent and are
/// only allowed when their weight is zero.
struct LossComponents {
  Tensor c, l, adl, adf, au, fl;

  static const std::array<std::string, 6>& names();
  std::array<const Tensor*, 6> all() const { return {&c, &l, &adl, &adf, &au, &fl}; }
};

Tensor total_loss(const LossWeights& w, const LossComponents& parts);

}  // namespace aurecon::loss
