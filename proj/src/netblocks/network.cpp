#include "aurecon/netblocks/network.hpp"

#include <sstream>

#include "aurecon/common/error.hpp"
#include "aurecon/diffcore/ops.hpp"

namespace aurecon::nets {

namespace d = aurecon::diff;

namespace {

template <class Self, class F>
void for_each_store(Self& nets, F&& f) {
  for (std::size_t i = 0; i < nets.branch.parts.size(); ++i) {
    f("landmark.part" + std::to_string(i + 1), nets.branch.parts[i].params());
  }
  f(std::string("landmark.cbam"), nets.branch.cbam.params());
  f(std::string("landmark.head"), nets.branch.head.params());
  for (std::size_t i = 0; i < nets.ef.parts.size(); ++i) {
    f("E_f.part" + std::to_string(i + 1), nets.ef.parts[i].params());
  }
  f(std::string("E_l"), nets.el.params());
  f(std::string("G_b"), nets.gb.params());
  f(std::string("G_st"), nets.gst.params());
  f(std::string("D_l"), nets.dl.params());
  f(std::string("D_d"), nets.dd.params());
  f(std::string("E_au"), nets.eau.params());
  for (std::size_t k = 0; k < nets.projectors.size(); ++k) {
    f("P_" + std::to_string(k / 2 + 1) + std::to_string(k % 2 + 1), nets.projectors[k].params());
  }
}

void require_feature(const Tensor& t, std::string_view what) {
  if (!t.defined()) throw Error(std::string(what) + " is undefined");
  if (t.rank() != 4) {
    throw ShapeError(std::string(what) + " must be an NCHW feature map, got " + d::shape_str(t.shape()));
  }
}

}  // namespace

// LandmarkBranch ---------------------------------------------------------------

Tensor LandmarkBranch::forward_parts(const Tensor& image, std::size_t count) const {
  if (count > parts.size()) throw Error("landmark branch has only " + std::to_string(parts.size()) + " parts");
  Tensor h = image;
  for (std::size_t i = 0; i < count; ++i) h = parts[i].forward(h);
  return h;
}

NamedStores LandmarkBranch::stores() {
  NamedStores out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.emplace_back("landmark.part" + std::to_string(i + 1), &parts[i].params());
  }
  out.emplace_back("landmark.cbam", &cbam.params());
  out.emplace_back("landmark.head", &head.params());
  return out;
}

LandmarkBranch LandmarkBranch::clone() const {
  std::vector<ConvPart> p;
  for (const auto& part : parts) p.push_back(part.clone());
  return LandmarkBranch{cfg, std::move(p), cbam.clone(), head.clone()};
}

// The output is RMS-normalised per sample. Without it the alignment loss can
// shrink every feature toward zero, taking the AU head's input with it.
Tensor FeatureExtractor::forward(const Tensor& image) const {
  Tensor h = image;
  for (const auto& p : parts) h = p.forward(h);
  return d::rms_normalize(h);
}

NamedStores FeatureExtractor::stores() {
  NamedStores out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.emplace_back("E_f.part" + std::to_string(i + 1), &parts[i].params());
  }
  return out;
}

FeatureExtractor FeatureExtractor::clone() const {
  FeatureExtractor f;
  for (const auto& p : parts) f.parts.push_back(p.clone());
  return f;
}

// FeatureBundle ----------------------------------------------------------------

const std::array<std::string, 14>& FeatureBundle::names() {
  static const std::array<std::string, 14> n{"F_s",   "F_t",    "F_sl",   "F_sb",    "F_tl",
                                             "F_tb",  "F_sltb", "F_sbtl", "F_sl'",   "F_sb'",
                                             "F_tl'", "F_tb'",  "F_s'",   "F_t'"};
  return n;
}

std::array<const Tensor*, 14> FeatureBundle::all() const {
  return {&F_s, &F_t, &F_sl, &F_sb, &F_tl, &F_tb, &F_sltb, &F_sbtl, &F_sl2, &F_sb2, &F_tl2, &F_tb2, &F_s2, &F_t2};
}

std::pair<const Tensor*, const Tensor*> FeatureBundle::pair(std::size_t i) const {
  switch (i) {
    case 0: return {&F_s2, &F_s};
    case 1: return {&F_t2, &F_t};
    case 2: return {&F_sl2, &F_sl};
    case 3: return {&F_sb2, &F_sb};
    case 4: return {&F_tl2, &F_tl};
    case 5: return {&F_tb2, &F_tb};
    default: throw Error("supervisor pair index " + std::to_string(i) + " out of range");
  }
}

std::string FeatureBundle::pair_name(std::size_t i) {
  static const std::array<std::string, kSupervisorPairs> n{"(F_s', F_s)",   "(F_t', F_t)",
                                                           "(F_sl', F_sl)", "(F_sb', F_sb)",
                                                           "(F_tl', F_tl)", "(F_tb', F_tb)"};
  return n.at(i);
}

// NetworkSet -------------------------------------------------------------------

NamedStores NetworkSet::stores() {
  NamedStores out;
  for_each_store(*this, [&](const std::string& name, ParamStore& ps) { out.emplace_back(name, &ps); });
  return out;
}

NamedStores NetworkSet::discriminator_stores() { return {{"D_l", &dl.params()}, {"D_d", &dd.params()}}; }

NamedStores NetworkSet::generator_stores(bool with_branch) {
  NamedStores out;
  for (auto& [name, ps] : stores()) {
    if (name == "D_l" || name == "D_d") continue;
    if (!with_branch && name.rfind("landmark.", 0) == 0) continue;
    if (tied_extractor && name.rfind("E_f.", 0) == 0) continue;
    out.emplace_back(name, ps);
  }
  return out;
}

NetworkSet NetworkSet::clone() const {
  NetworkSet n{cfg, branch.clone(), ef.clone(), el.clone(), gb.clone(), gst.clone(),
               dl.clone(), dd.clone(), eau.clone(), {}, tied_extractor};
  for (const auto& p : projectors) n.projectors.push_back(p.clone());
  return n;
}

void NetworkSet::set_identity_projectors(bool flag) {
  cfg.identity_projectors = flag;
  for (auto& p : projectors) p.set_identity(flag);
}

// Builders -------------------------------------------------------------------------

LandmarkBranch build_landmark_branch(const BlockConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<ConvPart> parts;
  std::size_t in = cfg.in_channels;
  std::size_t side = cfg.resolution;
  for (auto w : cfg.widths) {
    parts.emplace_back(in, w, rng);
    in = w;
    side /= 2;
  }
  Cbam cbam(cfg.widths[4], cfg.cbam_reduction, cfg.cbam_kernel, rng);
  MlpHead head(cfg.widths[4] * side * side, cfg.fc_hidden, 2 * cfg.n_land, rng);
  return LandmarkBranch{cfg, std::move(parts), std::move(cbam), std::move(head)};
}

NetworkSet build_network_set(const BlockConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  auto branch = build_landmark_branch(cfg, rng);
  FeatureExtractor ef;
  ef.parts.emplace_back(cfg.in_channels, cfg.widths[0], rng);
  ef.parts.emplace_back(cfg.widths[0], cfg.widths[1], rng);
  const std::size_t c = cfg.feature_channels();
  ConvStack el(c, c, 3, rng);
  ConvStack gb(c, c, 3, rng);
  ConvStack gst(2 * c, c, 3, rng);
  PooledHead dl(c, 2 * cfg.n_land, HeadOutput::linear, rng);
  PooledHead dd(c, 1, HeadOutput::sigmoid, rng);
  PooledHead eau(c, cfg.n_au, HeadOutput::sigmoid, rng);
  std::vector<Projector> projectors;
  for (std::size_t k = 0; k < 2 * kSupervisorPairs; ++k) projectors.emplace_back(c, cfg.identity_projectors);
  return NetworkSet{cfg,           std::move(branch), std::move(ef),  std::move(el),
                    std::move(gb), std::move(gst),    std::move(dl),  std::move(dd),
                    std::move(eau), std::move(projectors), false};
}

// Forward operations -------------------------------------------------------------------

Tensor cbam_forward(const Cbam& cbam, const Tensor& feat) {
  require_feature(feat, "CBAM input");
  return cbam.forward(feat);
}

Tensor forward_landmarks(const LandmarkBranch& branch, const Tensor& image) {
  require_feature(image, "image");
  const auto& cfg = branch.cfg;
  if (image.dim(1) != cfg.in_channels || image.dim(2) != cfg.resolution || image.dim(3) != cfg.resolution) {
    throw ShapeError("landmark branch expects (N, " + std::to_string(cfg.in_channels) + ", " +
                     std::to_string(cfg.resolution) + ", " + std::to_string(cfg.resolution) + ") images, got " +
                     d::shape_str(image.shape()));
  }
  auto feat = branch.cbam.forward(branch.forward_parts(image, branch.parts.size()));
  return branch.head.forward(d::flatten(feat));
}

Tensor extract_features(const FeatureExtractor& ef, const Tensor& image) {
  require_feature(image, "image");
  return ef.forward(image);
}

Tensor extract_features(const NetworkSet& nets, const Tensor& image) {
  if (nets.tied_extractor) {
    require_feature(image, "image");
    return d::rms_normalize(nets.branch.forward_parts(image, 2));
  }
  return extract_features(nets.ef, image);
}

void transfer_init(FeatureExtractor& ef, const LandmarkBranch& branch) {
  std::ostringstream diffs;
  bool mismatch = ef.parts.size() != 2 || branch.parts.size() < 2;
  if (mismatch) diffs << "E_f has " << ef.parts.size() << " parts; ";
  for (std::size_t i = 0; i < std::min<std::size_t>(2, ef.parts.size()) && i < branch.parts.size(); ++i) {
    const auto& dst = ef.parts[i].params().entries();
    const auto& src = branch.parts[i].params().entries();
    if (dst.size() != src.size()) {
      mismatch = true;
      diffs << "part" << i + 1 << ": layer count differs; ";
      continue;
    }
    for (std::size_t k = 0; k < dst.size(); ++k) {
      if (dst[k].value.shape() != src[k].value.shape()) {
        mismatch = true;
        diffs << "part" << i + 1 << "." << dst[k].name << ": E_f " << d::shape_str(dst[k].value.shape())
              << " vs branch " << d::shape_str(src[k].value.shape()) << "; ";
      }
    }
  }
  if (mismatch) throw ShapeError("transfer_init: structural mismatch: " + diffs.str());
  for (std::size_t i = 0; i < 2; ++i) ef.parts[i].params().copy_values_from(branch.parts[i].params());
}

std::pair<Tensor, Tensor> separate(const ConvStack& el, const ConvStack& gb, const Tensor& feat) {
  require_feature(feat, "feature");
  return {el.forward(feat), gb.forward(feat)};
}

Tensor reconstruct(const ConvStack& gst, const Tensor& landmark, const Tensor& background) {
  require_feature(landmark, "landmark feature");
  require_feature(background, "background feature");
  if (landmark.shape() != background.shape()) {
    throw ShapeError("reconstruct: landmark " + d::shape_str(landmark.shape()) + " and background " +
                     d::shape_str(background.shape()) + " shapes differ");
  }
  return gst.forward(d::concat_channels(landmark, background));
}

FeatureBundle full_graph_forward(const NetworkSet& nets, const Tensor& image_s, const Tensor& image_t) {
  require_feature(image_s, "source image");
  require_feature(image_t, "target image");
  if (image_s.dim(1) != image_t.dim(1) || image_s.dim(2) != image_t.dim(2) || image_s.dim(3) != image_t.dim(3)) {
    throw ShapeError("source " + d::shape_str(image_s.shape()) + " and target " + d::shape_str(image_t.shape()) +
                     " images must share channels and resolution");
  }
  FeatureBundle b;
  b.F_s = extract_features(nets, image_s);
  b.F_t = extract_features(nets, image_t);
  std::tie(b.F_sl, b.F_sb) = separate(nets.el, nets.gb, b.F_s);
  std::tie(b.F_tl, b.F_tb) = separate(nets.el, nets.gb, b.F_t);
  b.F_sltb = reconstruct(nets.gst, b.F_sl, b.F_tb);
  b.F_sbtl = reconstruct(nets.gst, b.F_sb, b.F_tl);
  // Second round: E_l recovers the landmark half, G_b the background half.
  std::tie(b.F_sl2, b.F_tb2) = separate(nets.el, nets.gb, b.F_sltb);
  std::tie(b.F_tl2, b.F_sb2) = separate(nets.el, nets.gb, b.F_sbtl);
  b.F_s2 = reconstruct(nets.gst, b.F_sl2, b.F_sb2);
  b.F_t2 = reconstruct(nets.gst, b.F_tl2, b.F_tb2);
  return b;
}

Tensor project(const Projector& p, const Tensor& feat) {
  require_feature(feat, "projector input");
  return p.forward(feat);
}

Tensor d_landmark_forward(const PooledHead& dl, const Tensor& feat) {
  require_feature(feat, "D_l input");
  return dl.forward(feat);
}

Tensor d_domain_forward(const PooledHead& dd, const Tensor& feat) {
  require_feature(feat, "D_d input");
  auto y = dd.forward(feat);
  return d::reshape(y, {y.dim(0)});
}

Tensor au_head_forward(const PooledHead& eau, const Tensor& feat) {
  require_feature(feat, "E_au input");
  return eau.forward(feat);
}

// Serialization ------------------------------------------------------------------

diff::Checkpoint to_checkpoint(NetworkSet& nets) {
  diff::Checkpoint ck;
  nlohmann::json manifest;
  manifest["format"] = "aurecon.networkset";
  manifest["config"] = nets.cfg.to_json();
  manifest["tied_extractor"] = nets.tied_extractor;
  manifest["blocks"] = nlohmann::json::array();
  for (auto& [name, ps] : nets.stores()) {
    manifest["blocks"].push_back(name);
    ck.add_store(name + "/", *ps);
  }
  ck.manifest = manifest.dump();
  return ck;
}

NetworkSet from_checkpoint(const diff::Checkpoint& ckpt) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(ckpt.manifest);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  if (manifest.value("format", "") != "aurecon.networkset") {
    throw FormatError("checkpoint does not hold a NetworkSet");
  }
  auto nets = build_network_set(BlockConfig::from_json(manifest.at("config")), 0);
  nets.tied_extractor = manifest.value("tied_extractor", false);
  for (auto& [name, ps] : nets.stores()) ckpt.restore_store(name + "/", *ps);
  nets.set_identity_projectors(nets.cfg.identity_projectors);
  return nets;
}

}  // namespace aurecon::nets
