#pragma once

#include <string_view>

#include "aurecon/diffcore/tensor.hpp"

namespace aurecon::diff {

enum class Activation { relu, sigmoid, tanh };

Activation parse_activation(std::string_view name);

// Layers -------------------------------------------------------------------

/// 2-D cross-correlation over an NCHW input with an OIKK square kernel.
/// `bias` may be undefined. Output extent per axis is
/// floor((h + 2*padding - k) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride = 1,
              std::size_t padding = 0);

/// 2x2 mean pooling with stride 2; a trailing odd row/column is dropped.
Tensor avgpool2(const Tensor& input);

/// Affine map over the last axis of an (N, in) input: y = x W^T + b with W of
/// shape (out, in). `bias` may be undefined.
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor activation(const Tensor& input, Activation kind);
inline Tensor relu(const Tensor& x) { return activation(x, Activation::relu); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, Activation::sigmoid); }
inline Tensor tanh(const Tensor& x) { return activation(x, Activation::tanh); }

// Elementwise --------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor square(const Tensor& x);
/// Subgradient sign(x), with 0 at x == 0.
Tensor abs(const Tensor& x);
Tensor log(const Tensor& x);
/// Gradient passes where lo <= x <= hi and is zero outside.
Tensor clamp(const Tensor& x, double lo, double hi);

// Reductions and reshaping -------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
/// (N, ...) -> (N, prod(...)).
Tensor flatten(const Tensor& x);
/// Concatenate two NCHW tensors along the channel axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// (N, C, H, W) -> (N, C): spatial mean / max per channel.
Tensor global_avg_pool(const Tensor& x);
Tensor global_max_pool(const Tensor& x);
/// (N, C, H, W) -> (N, 1, H, W): mean / max across channels.
Tensor channel_mean(const Tensor& x);
Tensor channel_max(const Tensor& x);

/// x * gate broadcast over space; gate is (N, C).
Tensor channel_gate(const Tensor& x, const Tensor& gate);
/// x * gate broadcast over channels; gate is (N, 1, H, W).
Tensor spatial_gate(const Tensor& x, const Tensor& gate);

/// Sum over every axis but the first: (N, ...) -> (N).
Tensor sum_per_sample(const Tensor& x);

/// Divides each sample by the root mean square of its entries:
/// y = x / sqrt(mean(x^2) + eps), the mean taken over every axis but the first.
Tensor rms_normalize(const Tensor& x, double eps = 1e-6);

}  // namespace aurecon::diff
