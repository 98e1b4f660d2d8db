#include "aurecon/netblocks/blocks.hpp"

#include <algorithm>

#include "aurecon/common/error.hpp"
#include "aurecon/diffcore/ops.hpp"

namespace aurecon::nets {

namespace d = aurecon::diff;

void BlockConfig::validate() const {
  if (in_channels == 0) throw Error("in_channels must be >= 1");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] == 0) throw Error("part " + std::to_string(i + 1) + " width must be >= 1");
  }
  if (n_land == 0) throw Error("n_land must be >= 1");
  if (n_au == 0) throw Error("n_au must be >= 1");
  if (cbam_reduction == 0) throw Error("cbam_reduction must be >= 1");
  if (cbam_kernel % 2 == 0) throw Error("cbam_kernel must be odd");
  if (fc_hidden == 0) throw Error("fc_hidden must be >= 1");
  if (resolution < kMinResolution) {
    throw Error("resolution " + std::to_string(resolution) + " cannot survive five 2x2 poolings (minimum " +
                std::to_string(kMinResolution) + ")");
  }
}

nlohmann::json BlockConfig::to_json() const {
  return {{"widths", widths},
          {"in_channels", in_channels},
          {"cbam_reduction", cbam_reduction},
          {"cbam_kernel", cbam_kernel},
          {"n_land", n_land},
          {"n_au", n_au},
          {"resolution", resolution},
          {"fc_hidden", fc_hidden},
          {"identity_projectors", identity_projectors}};
}

BlockConfig BlockConfig::from_json(const nlohmann::json& j) {
  BlockConfig c;
  c.widths = j.at("widths").get<std::array<std::size_t, 5>>();
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.cbam_reduction = j.at("cbam_reduction").get<std::size_t>();
  c.cbam_kernel = j.at("cbam_kernel").get<std::size_t>();
  c.n_land = j.at("n_land").get<std::size_t>();
  c.n_au = j.at("n_au").get<std::size_t>();
  c.resolution = j.at("resolution").get<std::size_t>();
  c.fc_hidden = j.at("fc_hidden").get<std::size_t>();
  c.identity_projectors = j.at("identity_projectors").get<bool>();
  return c;
}

namespace {

void add_conv(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out, std::size_t k,
              Rng& rng) {
  ps.add(name + ".weight", d::he_normal({out, in, k, k}, rng));
  ps.add(name + ".bias", Tensor::zeros({out}));
}

void add_fc(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  ps.add(name + ".weight", d::he_normal({out, in}, rng));
  ps.add(name + ".bias", Tensor::zeros({out}));
}

Tensor conv(const ParamStore& ps, const std::string& name, const Tensor& x, std::size_t pad) {
  return d::conv2d(x, ps.at(name + ".weight"), ps.at(name + ".bias"), 1, pad);
}

Tensor fc(const ParamStore& ps, const std::string& name, const Tensor& x) {
  return d::linear(x, ps.at(name + ".weight"), ps.at(name + ".bias"));
}

}  // namespace

// ConvPart -------------------------------------------------------------------

ConvPart::ConvPart(std::size_t in_channels, std::size_t out_channels, Rng& rng) {
  add_conv(params_, "conv1", in_channels, out_channels, 3, rng);
  add_conv(params_, "conv2", out_channels, out_channels, 3, rng);
}

Tensor ConvPart::forward(const Tensor& x) const {
  auto h = d::relu(conv(params_, "conv1", x, 1));
  h = d::relu(conv(params_, "conv2", h, 1));
  return d::avgpool2(h);
}

ConvPart ConvPart::clone() const {
  ConvPart c;
  c.params_ = params_.clone();
  return c;
}

// Cbam -----------------------------------------------------------------------

Cbam::Cbam(std::size_t channels, std::size_t reduction, std::size_t kernel, Rng& rng) : kernel_(kernel) {
  const std::size_t hidden = std::max<std::size_t>(1, channels / reduction);
  add_fc(params_, "mlp1", channels, hidden, rng);
  add_fc(params_, "mlp2", hidden, channels, rng);
  add_conv(params_, "spatial", 2, 1, kernel, rng);
}

Tensor Cbam::channel_attention(const Tensor& x) const {
  auto mlp = [&](const Tensor& desc) { return fc(params_, "mlp2", d::relu(fc(params_, "mlp1", desc))); };
  return d::sigmoid(d::add(mlp(d::global_avg_pool(x)), mlp(d::global_max_pool(x))));
}

Tensor Cbam::forward(const Tensor& x) const {
  auto refined = d::channel_gate(x, channel_attention(x));
  auto maps = d::concat_channels(d::channel_mean(refined), d::channel_max(refined));
  auto gate = d::sigmoid(conv(params_, "spatial", maps, kernel_ / 2));
  return d::spatial_gate(refined, gate);
}

Cbam Cbam::clone() const {
  Cbam c;
  c.params_ = params_.clone();
  c.kernel_ = kernel_;
  return c;
}

// MlpHead --------------------------------------------------------------------

MlpHead::MlpHead(std::size_t in_features, std::size_t hidden, std::size_t out_features, Rng& rng) {
  add_fc(params_, "fc1", in_features, hidden, rng);
  add_fc(params_, "fc2", hidden, out_features, rng);
}

Tensor MlpHead::forward(const Tensor& x) const {
  return fc(params_, "fc2", d::relu(fc(params_, "fc1", x)));
}

MlpHead MlpHead::clone() const {
  MlpHead c;
  c.params_ = params_.clone();
  return c;
}

// ConvStack ------------------------------------------------------------------

ConvStack::ConvStack(std::size_t in_channels, std::size_t channels, std::size_t layers, Rng& rng)
    : layers_(layers) {
  if (layers == 0) throw Error("ConvStack needs at least one layer");
  for (std::size_t i = 0; i < layers; ++i) {
    add_conv(params_, "conv" + std::to_string(i + 1), i == 0 ? in_channels : channels, channels, 3, rng);
  }
}

Tensor ConvStack::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_; ++i) {
    h = conv(params_, "conv" + std::to_string(i + 1), h, 1);
    if (i + 1 < layers_) h = d::relu(h);
  }
  return h;
}

ConvStack ConvStack::clone() const {
  ConvStack c;
  c.params_ = params_.clone();
  c.layers_ = layers_;
  return c;
}

// PooledHead -----------------------------------------------------------------

PooledHead::PooledHead(std::size_t channels, std::size_t out_features, HeadOutput output, Rng& rng)
    : output_(output) {
  for (int i = 1; i <= 3; ++i) add_conv(params_, "conv" + std::to_string(i), channels, channels, 3, rng);
  add_fc(params_, "fc", channels, out_features, rng);
}

Tensor PooledHead::forward(const Tensor& x) const {
  Tensor h = x;
  for (int i = 1; i <= 3; ++i) h = d::relu(conv(params_, "conv" + std::to_string(i), h, 1));
  auto y = fc(params_, "fc", d::global_avg_pool(h));
  return output_ == HeadOutput::sigmoid ? d::sigmoid(y) : y;
}

PooledHead PooledHead::clone() const {
  PooledHead c;
  c.params_ = params_.clone();
  c.output_ = output_;
  return c;
}

// Projector ------------------------------------------------------------------

Projector::Projector(std::size_t channels, bool identity) : identity_(identity) {
  std::vector<double> eye(channels * channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) eye[c * channels + c] = 1.0;
  params_.add("conv.weight", Tensor::from({channels, channels, 1, 1}, std::move(eye)));
  params_.add("conv.bias", Tensor::zeros({channels}));
}

Tensor Projector::forward(const Tensor& x) const {
  if (identity_) return x;
  return d::conv2d(x, params_.at("conv.weight"), params_.at("conv.bias"), 1, 0);
}

Projector Projector::clone() const {
  Projector c;
  c.params_ = params_.clone();
  c.identity_ = identity_;
  return c;
}

}  // namespace aurecon::nets
