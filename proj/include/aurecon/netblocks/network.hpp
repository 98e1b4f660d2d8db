#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "aurecon/diffcore/checkpoint.hpp"
#include "aurecon/netblocks/blocks.hpp"

namespace aurecon::nets {

using NamedStores = std::vector<std::pair<std::string, ParamStore*>>;

/// Five conv parts, CBAM, and a two-layer FC head regressing 2 * n_land
/// interleaved (x, y) coordinates.
struct LandmarkBranch {
  BlockConfig cfg;
  std::vector<ConvPart> parts;
  Cbam cbam;
  MlpHead head;

  /// Output of parts 1..count (count <= 5).
  Tensor forward_parts(const Tensor& image, std::size_t count) const;
  NamedStores stores();
  LandmarkBranch clone() const;
};

/// Shared feature extractor: structurally identical to landmark parts 1-2.
struct FeatureExtractor {
  std::vector<ConvPart> parts;

  Tensor forward(const Tensor& image) const;
  NamedStores stores();
  FeatureExtractor clone() const;
};

/// Number of alignment supervisor pairs, and their order:
/// (F_s', F_s), (F_t', F_t), (F_sl', F_sl), (F_sb', F_sb), (F_tl', F_tl), (F_tb', F_tb).
inline constexpr std::size_t kSupervisorPairs = 6;

/// Every intermediate feature of one source/target forward pass.
struct FeatureBundle {
  Tensor F_s, F_t;                      // extracted
  Tensor F_sl, F_sb, F_tl, F_tb;        // first separation
  Tensor F_sltb, F_sbtl;                // cross-domain reconstructions
  Tensor F_sl2, F_sb2, F_tl2, F_tb2;    // second separation (primed)
  Tensor F_s2, F_t2;                    // cross-cycle reconstructions (primed)

  static const std::array<std::string, 14>& names();
  std::array<const Tensor*, 14> all() const;
  /// (reconstructed, original) for supervisor pair i in [0, 6).
  std::pair<const Tensor*, const Tensor*> pair(std::size_t i) const;
  static std::string pair_name(std::size_t i);
};

/// All trainable blocks. E_l, G_b, G_st, D_l, D_d, E_au and every projector
/// hold a single parameter set used by both the source and target paths.
struct NetworkSet {
  BlockConfig cfg;
  LandmarkBranch branch;
  FeatureExtractor ef;
  ConvStack el;
  ConvStack gb;
  ConvStack gst;
  PooledHead dl;
  PooledHead dd;
  PooledHead eau;
  /// Index 2*i + j is P_{i+1, j+1}: j = 0 projects the reconstructed side,
  /// j = 1 the original side.
  std::vector<Projector> projectors;
  /// E_f reuses the landmark branch's parts 1-2 instead of its own copy.
  bool tied_extractor = false;

  /// Every block by name, landmark branch first.
  NamedStores stores();
  /// Blocks updated in the discriminator step (D_l, D_d).
  NamedStores discriminator_stores();
  /// Everything else that the generator step updates; the landmark branch is
  /// included only when `with_branch` is set.
  NamedStores generator_stores(bool with_branch);
  NetworkSet clone() const;
  Projector& projector(std::size_t pair, std::size_t side) { return projectors.at(2 * pair + side); }
  const Projector& projector(std::size_t pair, std::size_t side) const { return projectors.at(2 * pair + side); }
  void set_identity_projectors(bool flag);
};

LandmarkBranch build_landmark_branch(const BlockConfig& cfg, Rng& rng);
NetworkSet build_network_set(const BlockConfig& cfg, std::uint64_t seed);

Tensor cbam_forward(const Cbam& cbam, const Tensor& feat);
/// (N, C, R, R) image at cfg.resolution -> (N, 2 * n_land).
Tensor forward_landmarks(const LandmarkBranch& branch, const Tensor& image);
Tensor extract_features(const NetworkSet& nets, const Tensor& image);
Tensor extract_features(const FeatureExtractor& ef, const Tensor& image);

/// Copies landmark parts 1-2 into E_f (deep copy). Throws ShapeError
/// listing every differing layer shape if the structures disagree.
void transfer_init(FeatureExtractor& ef, const LandmarkBranch& branch);

std::pair<Tensor, Tensor> separate(const ConvStack& el, const ConvStack& gb, const Tensor& feat);
Tensor reconstruct(const ConvStack& gst, const Tensor& landmark, const Tensor& background);
FeatureBundle full_graph_forward(const NetworkSet& nets, const Tensor& image_s, const Tensor& image_t);
Tensor project(const Projector& p, const Tensor& feat);
/// (N, 2 * n_land) landmark regression from a feature map.
Tensor d_landmark_forward(const PooledHead& dl, const Tensor& feat);
/// (N) scores in (0, 1); 1 means source domain, 0 target.
Tensor d_domain_forward(const PooledHead& dd, const Tensor& feat);
/// (N, n_au) occurrence probabilities.
Tensor au_head_forward(const PooledHead& eau, const Tensor& feat);

/// NetworkSet <-> checkpoint (manifest carries the block config and block list).
diff::Checkpoint to_checkpoint(NetworkSet& nets);
NetworkSet from_checkpoint(const diff::Checkpoint& ckpt);

}  // namespace aurecon::nets
