#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aurecon/diffcore/init.hpp"
#include "aurecon/diffcore/param_store.hpp"

namespace aurecon::nets {

using diff::ParamStore;
using diff::Rng;
using diff::Tensor;

/// Architecture knobs shared by every block.
struct BlockConfig {
  /// Output channels of the five landmark-branch parts. Parts 1-2 also define E_f.
  std::array<std::size_t, 5> widths{8, 16, 16, 32, 32};
  std::size_t in_channels = 3;
  std::size_t cbam_reduction = 16;
  std::size_t cbam_kernel = 7;
  std::size_t n_land = 49;
  std::size_t n_au = 6;
  std::size_t resolution = 176;
  std::size_t fc_hidden = 64;
  /// Projectors become the identity map (used when alignment supervision is ablated).
  bool identity_projectors = false;

  /// Smallest input side that survives five 2x2 poolings.
  static constexpr std::size_t kMinResolution = 32;

  void validate() const;
  std::size_t feature_channels() const { return widths[1]; }
  std::size_t feature_size() const { return resolution / 4; }

  nlohmann::json to_json() const;
  static BlockConfig from_json(const nlohmann::json& j);
  bool operator==(const BlockConfig&) const = default;
};

/// conv3x3 -> relu -> conv3x3 -> relu -> avgpool2.
class ConvPart {
 public:
  ConvPart(std::size_t in_channels, std::size_t out_channels, Rng& rng);
  Tensor forward(const Tensor& x) const;
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  ConvPart clone() const;

 private:
  ConvPart() = default;
  ParamStore params_;
};

/// Channel attention (shared MLP over avg/max descriptors) followed by
/// spatial attention (k x k conv over channel mean/max maps); both gates
/// are sigmoids and the output keeps the input shape.
class Cbam {
 public:
  Cbam(std::size_t channels, std::size_t reduction, std::size_t kernel, Rng& rng);
  Tensor forward(const Tensor& x) const;
  /// The (N, C) channel gate alone, exposed for tests.
  Tensor channel_attention(const Tensor& x) const;
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  Cbam clone() const;

 private:
  Cbam() = default;
  ParamStore params_;
  std::size_t kernel_ = 7;
};

/// Two fully-connected layers with a relu between.
class MlpHead {
 public:
  MlpHead(std::size_t in_features, std::size_t hidden, std::size_t out_features, Rng& rng);
  Tensor forward(const Tensor& x) const;
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  MlpHead clone() const;

 private:
  MlpHead() = default;
  ParamStore params_;
};

/// Shape-preserving stack of 3x3 convolutions: relu after every layer but
/// the last. Used for E_l, G_b (in == out) and G_st (in == 2 * out).
class ConvStack {
 public:
  ConvStack(std::size_t in_channels, std::size_t channels, std::size_t layers, Rng& rng);
  Tensor forward(const Tensor& x) const;
  std::size_t layers() const { return layers_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  ConvStack clone() const;

 private:
  ConvStack() = default;
  ParamStore params_;
  std::size_t layers_ = 0;
};

enum class HeadOutput { linear, sigmoid };

/// Three relu convolutions, global average pooling, then one FC layer.
/// Used for D_l (linear), D_d and E_au (sigmoid).
class PooledHead {
 public:
  PooledHead(std::size_t channels, std::size_t out_features, HeadOutput output, Rng& rng);
  /// (N, C, H, W) -> (N, out_features).
  Tensor forward(const Tensor& x) const;
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  PooledHead clone() const;

 private:
  PooledHead() = default;
  ParamStore params_;
  HeadOutput output_ = HeadOutput::linear;
};

/// 1x1 convolution, initialised to the identity map. In identity mode the
/// parameters are ignored and the input is returned unchanged.
class Projector {
 public:
  Projector(std::size_t channels, bool identity);
  Tensor forward(const Tensor& x) const;
  bool identity() const { return identity_; }
  void set_identity(bool flag) { identity_ = flag; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  Projector clone() const;

 private:
  Projector() = default;
  ParamStore params_;
  bool identity_ = false;
};

}  // namespace aurecon::nets
