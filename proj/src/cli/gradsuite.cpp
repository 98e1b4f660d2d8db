#include "aurecon/cli/gradsuite.hpp"

#include <functional>

#include "aurecon/diffcore/init.hpp"
#include "aurecon/diffcore/ops.hpp"
#include "aurecon/losses/losses.hpp"
#include "aurecon/netblocks/network.hpp"

namespace aurecon::cli {

namespace {

using diff::ParamStore;
using diff::Rng;
using diff::Tensor;
using nets::NamedStores;

Tensor uniform(diff::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  return diff::random_uniform(std::move(shape), lo, hi, rng);
}

Tensor probe(const Tensor& y, std::uint64_t seed) { return diff::sum(diff::mul(y, uniform(y.shape(), seed ^ 0x5bd1e995))); }

nets::BlockConfig small_blocks() {
  nets::BlockConfig cfg;
  cfg.widths = {3, 4, 4, 4, 6};
  cfg.resolution = 32;
  cfg.fc_hidden = 8;
  cfg.n_land = 3;
  cfg.n_au = 2;
  cfg.cbam_reduction = 2;
  cfg.cbam_kernel = 3;
  return cfg;
}

/// The fourteen bundle features as independent trainable leaves.
struct LeafBundle {
  ParamStore store;
  nets::FeatureBundle bundle;

  explicit LeafBundle(std::uint64_t seed) {
    const auto names = nets::FeatureBundle::names();
    std::array<Tensor*, 14> slots = {&bundle.F_s,   &bundle.F_t,   &bundle.F_sl,  &bundle.F_sb,  &bundle.F_tl,
                                     &bundle.F_tb,  &bundle.F_sltb, &bundle.F_sbtl, &bundle.F_sl2, &bundle.F_sb2,
                                     &bundle.F_tl2, &bundle.F_tb2, &bundle.F_s2,  &bundle.F_t2};
    for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = store.add(names[i], uniform({2, 4, 3, 3}, seed + i));
  }
};

}  // namespace

std::vector<GradSuiteEntry> run_grad_suite(const diff::GradCheckOptions& opts) {
  std::vector<GradSuiteEntry> out;
  auto check = [&](const std::string& name, const diff::LossClosure& f, const NamedStores& stores) {
    const auto rep = diff::grad_check(f, stores, opts);
    std::size_t n = 0;
    for (const auto& p : rep.params) n += p.checked;
    out.push_back({name, rep.max_rel_error, n, rep.passed});
  };

  const auto cfg = small_blocks();
  auto net = nets::build_network_set(cfg, 7);
  Rng rng(8);

  for (std::size_t i = 0; i < 5; ++i) {
    nets::ConvPart part(2, 3, rng);
    const auto x = uniform({1, 2, 6, 6}, 10 + i);
    check("landmark.part" + std::to_string(i + 1), [&] { return probe(part.forward(x), i); },
          {{"part", &part.params()}});
  }
  {
    nets::Cbam cbam(4, 2, 3, rng);
    ParamStore in;
    const auto x = in.add("x", uniform({2, 4, 4, 4}, 20));
    check("landmark.cbam", [&] { return probe(nets::cbam_forward(cbam, x), 21); },
          {{"cbam", &cbam.params()}, {"input", &in}});
  }
  {
    nets::MlpHead head(12, 5, 6, rng);
    const auto x = uniform({2, 12}, 22);
    check("landmark.head", [&] { return probe(head.forward(x), 23); }, {{"head", &head.params()}});
  }
  const auto image = uniform({1, 3, 8, 8}, 30, 0.0, 1.0);
  check("E_f", [&] { return probe(nets::extract_features(net, image), 31); }, net.ef.stores());

  const auto feat = uniform({2, 4, 3, 3}, 32);
  check("E_l", [&] { return probe(net.el.forward(feat), 33); }, {{"E_l", &net.el.params()}});
  check("G_b", [&] { return probe(net.gb.forward(feat), 34); }, {{"G_b", &net.gb.params()}});
  const auto other = uniform({2, 4, 3, 3}, 35);
  check("G_st", [&] { return probe(nets::reconstruct(net.gst, feat, other), 36); }, {{"G_st", &net.gst.params()}});
  check("D_l", [&] { return probe(nets::d_landmark_forward(net.dl, feat), 37); }, {{"D_l", &net.dl.params()}});
  check("D_d", [&] { return probe(nets::d_domain_forward(net.dd, feat), 38); }, {{"D_d", &net.dd.params()}});
  check("E_au", [&] { return probe(nets::au_head_forward(net.eau, feat), 39); }, {{"E_au", &net.eau.params()}});

  NamedStores projectors;
  for (std::size_t k = 0; k < net.projectors.size(); ++k) {
    auto w = net.projectors[k].params().entries().front().value.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += 0.05 * static_cast<double>((i + k) % 5);
    projectors.emplace_back("P_" + std::to_string(k / 2 + 1) + std::to_string(k % 2 + 1), &net.projectors[k].params());
  }
  check("P_ij", [&] { return probe(nets::project(net.projectors[3], feat), 40); }, projectors);

  // Losses.
  {
    ParamStore ps;
    const auto pred = ps.add("pred", uniform({2, 6}, 50));
    const loss::LandmarkTarget t{uniform({2, 6}, 51), {0.4, 0.7}};
    check("L_fl (landmark_loss)", [&] { return loss::landmark_loss(pred, t); }, {{"pred", &ps}});
  }
  {
    LeafBundle lb(60);
    NamedStores stores = projectors;
    stores.emplace_back("features", &lb.store);
    check("L_c (contrastive_alignment_loss)", [&] { return loss::contrastive_alignment_loss(lb.bundle, net.projectors); },
          stores);
  }
  {
    ParamStore ps;
    const auto p = ps.add("probs", uniform({2, 2}, 70, 0.1, 0.9));
    const loss::AuTarget t{Tensor::from({2, 2}, {1, 0, 1, 1}), {0.8, 1.2}};
    check("L_au (au_loss)", [&] { return loss::au_loss(p, t); }, {{"probs", &ps}});
  }
  const loss::LandmarkTarget src{uniform({2, 6}, 80), {0.4, 0.5}}, tgt{uniform({2, 6}, 81), {0.6, 0.3}};
  const std::vector<double> mean_face = {0.3, 0.3, 0.7, 0.3, 0.5, 0.7};
  {
    ParamStore ps;
    const auto a = ps.add("F_sl", uniform({2, 4, 3, 3}, 82)), b = ps.add("F_tl", uniform({2, 4, 3, 3}, 83));
    check("L_l (landmark_feature_loss)", [&] { return loss::landmark_feature_loss(net.dl, a, b, src, tgt); },
          {{"D_l", &net.dl.params()}, {"features", &ps}});
  }
  {
    ParamStore ps;
    const auto a = ps.add("F_sb", uniform({2, 4, 3, 3}, 84)), b = ps.add("F_tb", uniform({2, 4, 3, 3}, 85));
    check("L_adl d-step", [&] { return loss::adversarial_landmark_losses(net.dl, a, b, src, tgt, mean_face).d_step; },
          {{"D_l", &net.dl.params()}});
    check("L_adl g-step", [&] { return loss::adversarial_landmark_losses(net.dl, a, b, src, tgt, mean_face).g_step; },
          {{"D_l", &net.dl.params()}, {"features", &ps}});
  }
  {
    LeafBundle lb(90);
    check("L_adf d-step", [&] { return loss::adversarial_domain_losses(net.dd, lb.bundle).d_step; },
          {{"D_d", &net.dd.params()}});
    check("L_adf g-step", [&] { return loss::adversarial_domain_losses(net.dd, lb.bundle).g_step; },
          {{"D_d", &net.dd.params()}, {"features", &lb.store}});
  }
  {
    ParamStore ps;
    const auto c = ps.add("c", uniform({1}, 100, 0.1, 1.0));
    const auto fl = ps.add("fl", uniform({1}, 101, 0.1, 1.0));
    const auto au = ps.add("au", uniform({1}, 102, 0.1, 1.0));
    const loss::LossWeights w;
    check("total_loss",
          [&] {
            loss::LossComponents parts;
            parts.c = diff::sum(c);
            parts.l = diff::square(diff::sum(c));
            parts.adl = diff::sum(fl);
            parts.adf = diff::mul(diff::sum(fl), diff::sum(au));
            parts.au = diff::sum(au);
            parts.fl = diff::sum(fl);
            return loss::total_loss(w, parts);
          },
          {{"components", &ps}});
  }
  return out;
}

}  // namespace aurecon::cli
