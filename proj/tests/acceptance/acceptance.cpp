// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/perfect_weights.hpp"
#include "../support/temp_dir.hpp"
#include "aurecon/cli/app.hpp"
#include "aurecon/cli/gradsuite.hpp"
#include "aurecon/datapipe/synth.hpp"
#include "aurecon/diffcore/ops.hpp"
#include "aurecon/trainer/trainer.hpp"

namespace {

using namespace aurecon;
namespace fs = std::filesystem;
using diff::Tensor;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;

  // Records a named check; failed checks are listed first in the detail.
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!ok) detail = "FAILED " + what + (detail.empty() ? "" : "; " + detail);
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string num(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Tensor rand_tensor(diff::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  diff::Rng rng(seed);
  return diff::random_uniform(std::move(shape), lo, hi, rng);
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  const auto x = a.data(), y = b.data();
  return std::equal(x.begin(), x.end(), y.begin());
}

double window_mean(const std::vector<double>& v, std::size_t begin, std::size_t len) {
  const auto first = v.begin() + static_cast<long>(begin);
  return std::accumulate(first, first + static_cast<long>(len), 0.0) / static_cast<double>(len);
}

// Values of `key` over the step records that carry it, in step order.
std::vector<double> collect(const train::RunLog& log, const std::string& key) {
  std::vector<double> out;
  for (const auto& s : log.steps()) {
    for (const auto& [k, v] : s.values) {
      if (k == key) out.push_back(v);
    }
  }
  return out;
}

// 1 -------------------------------------------------------------------------------------

Verdict gradient_suite() {
  Verdict v;
  const auto t0 = Clock::now();
  diff::GradCheckOptions opts;
  opts.tol = 1e-4;
  const auto entries = cli::run_grad_suite(opts);
  double worst = 0.0;
  for (const auto& e : entries) {
    v.check(e.passed && e.max_rel_error <= 1e-4, e.name + " rel error " + num("%.2e", e.max_rel_error));
    worst = std::max(worst, e.max_rel_error);
  }
  const std::set<std::string> expected = {"landmark.part1", "landmark.part2", "landmark.part3", "landmark.part4",
                                          "landmark.part5", "landmark.cbam",  "E_f",            "E_l",
                                          "G_b",            "G_st",           "D_l",            "D_d",
                                          "E_au",           "P_ij"};
  for (const auto& name : expected) {
    v.check(std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.name == name; }),
            "block " + name + " checked");
  }
  for (const std::string loss : {"L_fl", "L_c", "L_au", "L_l", "L_adl d-step", "L_adl g-step", "L_adf d-step",
                                 "L_adf g-step", "total_loss"}) {
    v.check(std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.name.rfind(loss, 0) == 0; }),
            "loss " + loss + " checked");
  }
  const double secs = seconds_since(t0);
  v.check(secs < 300.0, "runtime under 5 minutes");
  v.note(std::to_string(entries.size()) + " entries, max rel error " + num("%.2e", worst) + ", " +
         num("%.1f", secs) + " s");
  return v;
}

// 2 -------------------------------------------------------------------------------------

Verdict loss_identities() {
  Verdict v;
  const double tol = 1e-9;

  const auto target = Tensor::from({1, 2}, {0.0, 0.0});
  const double fl_hand = loss::landmark_loss(Tensor::from({1, 2}, {0.3, 0.4}), {target, {1.0}}).item();
  v.check(std::fabs(fl_hand - 0.125) <= tol, "L_fl hand case = 0.125 (got " + num("%.12g", fl_hand) + ")");
  const auto pred = rand_tensor({3, 10}, 1);
  v.check(loss::landmark_loss(pred, {pred.clone(), {0.4, 0.5, 0.6}}).item() == 0.0, "L_fl = 0 at exact prediction");

  nets::BlockConfig cfg;
  cfg.widths = {3, 4, 4, 4, 6};
  cfg.resolution = 32;
  cfg.fc_hidden = 8;
  cfg.identity_projectors = true;
  auto net = nets::build_network_set(cfg, 3);
  auto bundle = nets::full_graph_forward(net, rand_tensor({2, 3, 32, 32}, 4, 0, 1), rand_tensor({2, 3, 32, 32}, 5, 0, 1));
  double pair_sum = 0.0;
  for (std::size_t i = 0; i < nets::kSupervisorPairs; ++i) {
    loss::PairMask only{};
    only[i] = true;
    pair_sum += loss::contrastive_alignment_loss(bundle, net.projectors, only).item();
  }
  const double full = loss::contrastive_alignment_loss(bundle, net.projectors).item();
  v.check(std::fabs(full - pair_sum) <= tol * std::max(1.0, full), "L_c additive over its six pairs");
  bundle.F_s2 = bundle.F_s;
  bundle.F_t2 = bundle.F_t;
  bundle.F_sl2 = bundle.F_sl;
  bundle.F_sb2 = bundle.F_sb;
  bundle.F_tl2 = bundle.F_tl;
  bundle.F_tb2 = bundle.F_tb;
  v.check(std::fabs(loss::contrastive_alignment_loss(bundle, net.projectors).item()) <= tol,
          "L_c = 0 under perfect reconstruction");

  const double au = loss::au_loss(Tensor::from({1, 1}, {0.5}), {Tensor::from({1, 1}, {1.0}), {1.0}}).item();
  v.check(std::fabs(au - std::numbers::ln2) <= tol, "L_au hand case = ln 2 (got " + num("%.12g", au) + ")");

  loss::LossComponents ones;
  for (Tensor* t : {&ones.c, &ones.l, &ones.adl, &ones.adf, &ones.au, &ones.fl}) *t = Tensor::scalar(1.0);
  const double total = loss::total_loss(loss::LossWeights{}, ones).item();
  v.check(std::fabs(total - 502.9) <= tol, "weighted objective with unit components = 502.9 (got " +
                                               num("%.12g", total) + ")");
  v.note("L_fl " + num("%.6g", fl_hand) + ", L_au " + num("%.10f", au) + ", total " + num("%.6f", total));
  return v;
}

// 3 -------------------------------------------------------------------------------------

Verdict shape_contract() {
  Verdict v;
  nets::BlockConfig cfg;  // 176 px input, full-size defaults
  auto net = nets::build_network_set(cfg, 1);
  const auto x = rand_tensor({1, 3, 176, 176}, 2, 0, 1);
  std::vector<std::size_t> chain;
  Tensor h = x;
  for (const auto& part : net.branch.parts) {
    h = part.forward(h);
    chain.push_back(h.dim(2));
    v.check(h.dim(2) == h.dim(3), "square maps");
  }
  v.check(chain == std::vector<std::size_t>{88, 44, 22, 11, 5}, "branch chain 88/44/22/11/5");
  const auto f = nets::extract_features(net, x);
  v.check(f.dim(2) == 44 && f.dim(3) == 44, "E_f features at 44x44");
  const auto bundle = nets::full_graph_forward(net, x, rand_tensor({1, 3, 176, 176}, 3, 0, 1));
  const auto shape = bundle.F_s.shape();
  std::size_t same = 0;
  for (const auto* t : bundle.all()) same += t->shape() == shape ? 1 : 0;
  v.check(same == 14, "all fourteen bundle features share one shape");
  v.check(nets::forward_landmarks(net.branch, x).dim(1) == 2 * cfg.n_land, "landmark head emits 2 * n_land");
  std::string c;
  for (auto s : chain) c += (c.empty() ? "" : "/") + std::to_string(s);
  v.note("chain " + c + ", features " + std::to_string(shape[1]) + "x" + std::to_string(shape[2]) + "x" +
         std::to_string(shape[3]) + ", " + std::to_string(same) + "/14 shared");
  return v;
}

// 4 -------------------------------------------------------------------------------------

Verdict cross_cycle_oracle() {
  Verdict v;
  nets::BlockConfig cfg;
  cfg.widths = {4, 8, 8, 8, 8};
  cfg.resolution = 64;
  cfg.fc_hidden = 8;
  cfg.identity_projectors = true;
  auto net = nets::build_network_set(cfg, 9);
  testing::install_perfect_disentanglement(net);
  const auto bundle =
      nets::full_graph_forward(net, rand_tensor({2, 3, 64, 64}, 1, 0, 1), rand_tensor({2, 3, 64, 64}, 2, 0, 1));
  v.check(bit_equal(bundle.F_s2, bundle.F_s), "F_s' == F_s exactly");
  v.check(bit_equal(bundle.F_t2, bundle.F_t), "F_t' == F_t exactly");
  const double lc = loss::contrastive_alignment_loss(bundle, net.projectors).item();
  v.check(lc == 0.0, "L_c == 0");
  // The reconstructions swap domains, so they must differ from the originals.
  v.check(!bit_equal(bundle.F_sltb, bundle.F_s), "F_sltb differs from F_s");
  v.note("L_c = " + num("%g", lc));
  return v;
}

// 5 -------------------------------------------------------------------------------------

Verdict overfit_convergence() {
  Verdict v;
  testing::TempDir dir("aurecon_accept_overfit");
  data::SynthSpec spec;
  spec.image_size = 32;
  spec.source_train = 16;
  spec.target_train = 1;
  spec.source_test = 1;
  spec.target_test = 1;
  const auto m = data::synth_dataset(spec, 3, dir.path());
  train::TrainConfig cfg;
  cfg.geom = {32, 32};
  cfg.block.resolution = 32;
  cfg.block.n_au = m.n_au;
  cfg.augment = false;
  cfg.pretrain_lr = 1e-3;
  cfg.batch_size = 8;
  cfg.pretrain_epochs = 250;  // 16 samples / 8 = 2 steps per epoch, 500 steps
  const auto train_set = data::load_split(m, data::Domain::source, data::Split::train, cfg.geom);
  train::RunLog log;
  const auto t0 = Clock::now();
  const auto res = train::pretrain_landmark_branch(cfg, train_set, nullptr, log);
  const double secs = seconds_since(t0);

  v.check(train_set.size() == 16, "16 samples");
  v.check(res.steps <= 500, "at most 500 steps");
  v.check(res.best_error < 0.05, "error below 0.05 of inter-ocular distance (got " + num("%.4f", res.best_error) + ")");
  v.check(std::fabs(train::landmark_error(res.branch, train_set) - res.best_error) < 1e-12,
          "returned branch has the reported error");
  const auto loss = collect(log, "L_fl");
  v.check(loss.size() == res.steps, "every step logged");
  // Smoothed trend: consecutive 50-step window means, last well under first.
  const std::size_t w = 50;
  if (loss.size() >= 2 * w) {
    const double first = window_mean(loss, 0, w), last = window_mean(loss, loss.size() - w, w);
    std::size_t rises = 0;
    for (std::size_t b = w; b + w <= loss.size(); b += w) rises += window_mean(loss, b, w) > window_mean(loss, b - w, w);
    v.check(last < 0.1 * first, "last 50-step window below a tenth of the first");
    v.check(rises <= 2, "window means fall (rises: " + std::to_string(rises) + ")");
    v.note("L_fl window " + num("%.4g", first) + " -> " + num("%.4g", last));
  } else {
    v.check(false, "enough steps for the window trend");
  }
  v.check(secs < 600.0, "runtime under 10 minutes");
  v.note(std::to_string(res.steps) + " steps, best error " + num("%.4f", res.best_error) + " iod at epoch " +
         std::to_string(res.best_epoch.value_or(0) + 1) + ", " + num("%.1f", secs) + " s");
  return v;
}

// 6 -------------------------------------------------------------------------------------

Verdict end_to_end() {
  Verdict v;
  testing::TempDir dir("aurecon_accept_e2e");
  const auto data_dir = (dir.path() / "data").string(), run_dir = (dir.path() / "run").string();
  std::ostringstream out, err;
  const auto t0 = Clock::now();
  int rc = cli::run({"synth", "--out", data_dir, "--seed", "2024", "--synth.image_size", "80", "--synth.source_train",
                     "400", "--synth.target_train", "400", "--synth.source_test", "100", "--synth.target_test", "100"},
                    out, err);
  v.check(rc == 0, "synth: " + err.str());
  // At 64 px the landmark terms start near 200 and L_c near 35 while L_au starts
  // near 1.4. The auxiliary weights put each of them at a few percent of L_au
  // on the first step; with the default weights the AU head never leaves the prior.
  rc = cli::run({"train", "--manifest", data_dir + "/manifest.jsonl", "--out", run_dir, "--seed", "1", "--ablation",
                 "AS-full", "--geometry.aligned", "72", "--geometry.crop", "64", "--pretrain.lr", "1e-3",
                 "--pretrain.epochs", "10", "--main.lr", "1e-3", "--main.epochs", "12", "--finetune.epochs", "1",
                 "--weights.c", "0.001", "--weights.l", "0.0001", "--weights.adl", "0.0003", "--weights.adf", "0.03"},
                out, err);
  v.check(rc == 0, "train: " + err.str());
  const double secs = seconds_since(t0);
  if (!v.pass) return v;

  // RunLog::read re-checks that every logged value is finite.
  const auto log = train::RunLog::read(fs::path(run_dir) / "log.jsonl");
  std::size_t values = 0, finite = 0;
  for (const auto& s : log.steps()) {
    for (const auto& [k, x] : s.values) {
      ++values;
      finite += std::isfinite(x) ? 1 : 0;
    }
  }
  v.check(values > 0 && finite == values, "every logged loss finite");

  const auto m = data::load_manifest(data_dir + "/manifest.jsonl");
  const auto final = train::restore_network(fs::path(run_dir) / "final.ckpt");
  const auto test = data::load_split(m, data::Domain::target, data::Split::test, final.config.geom);
  const auto model = eval::report(train::evaluate_au(final.nets, test, 0.5));
  eval::ConfusionCounts all_positive(m.n_au);
  for (const auto& s : test.samples) all_positive.update(std::vector<double>(m.n_au, 1.0), *s.au);
  const double baseline = eval::report(all_positive).mean_f1;
  v.check(model.mean_f1 >= baseline + 0.10, "target F1 at least 10 points above all-positive");

  const auto sltb = collect(log, "Dd_sltb"), sbtl = collect(log, "Dd_sbtl");
  const std::size_t w = 50;
  if (sltb.size() >= w && sbtl.size() == sltb.size()) {
    const double a = window_mean(sltb, sltb.size() - w, w), b = window_mean(sbtl, sbtl.size() - w, w);
    const double pooled = 0.5 * (a + b);
    v.check(pooled > 0.3 && pooled < 0.7, "D_d on reconstructed features, final window mean in (0.3, 0.7)");
    v.note("D_d final window: pooled " + num("%.3f", pooled) + " (F_sltb " + num("%.3f", a) + ", F_sbtl " +
           num("%.3f", b) + ")");
  } else {
    v.check(false, "enough joint steps for a 50-step window");
  }
  v.note("target F1 " + num("%.3f", model.mean_f1) + " vs all-positive " + num("%.3f", baseline) + ", " +
         std::to_string(log.steps().size()) + " steps, " + num("%.0f", secs) + " s");
  return v;
}

// 7 -------------------------------------------------------------------------------------

Verdict ablation_structure() {
  Verdict v;
  testing::TempDir dir("aurecon_accept_ablation");
  const auto data_dir = (dir.path() / "data").string();
  std::ostringstream out, err;
  v.check(cli::run({"synth", "--out", data_dir, "--seed", "4", "--synth.image_size", "40", "--synth.source_train", "8",
                    "--synth.target_train", "8", "--synth.source_test", "4", "--synth.target_test", "4"},
                   out, err) == 0,
          "synth");
  std::vector<nlohmann::json> resolved;
  for (const std::string ablation : {"BL", "ML", "AS-full"}) {
    const auto run = (dir.path() / ablation).string();
    const int rc = cli::run({"train", "--manifest", data_dir + "/manifest.jsonl", "--out", run, "--ablation",
                             ablation, "--geometry.aligned", "36", "--geometry.crop", "32", "--block.widths", "3", "4",
                             "4", "4", "4", "--block.fc_hidden", "6", "--batch_size", "4", "--pretrain.epochs", "1",
                             "--main.epochs", "1", "--finetune.epochs", "0"},
                            out, err);
    v.check(rc == 0, ablation + " runs from flags");
    if (rc == 0) resolved.push_back(train::restore_network(fs::path(run) / "final.ckpt").config.to_json());
  }
  if (resolved.size() == 3) {
    v.check(resolved[0] != resolved[1] && resolved[1] != resolved[2] && resolved[0] != resolved[2],
            "three distinct resolved configs");
  }

  // With alignment supervision off the four intermediate pairs cannot move
  // L_c: replacing their reconstructed sides with noise leaves it
  // bit-identical, so their contribution and its gradient are zero.
  const auto m = data::load_manifest(data_dir + "/manifest.jsonl");
  train::TrainConfig base;
  base.geom = {36, 32};
  base.block.resolution = 32;
  base.block.widths = {3, 4, 4, 4, 4};
  base.block.fc_hidden = 6;
  base.block.n_au = m.n_au;
  base.block.n_land = m.schema.train_landmarks.size();
  const auto src = data::load_split(m, data::Domain::source, data::Split::train, base.geom);
  const auto tgt = data::load_split(m, data::Domain::target, data::Split::train, base.geom);
  const auto td = train::TrainData::from_manifest(m, src, tgt, nullptr);
  data::PairedBatches batches(src, tgt, 4, 3, 0, false);
  data::PairedBatch batch;
  batches.next(batch);
  std::string moved;
  for (const auto ab : {train::Ablation::bl, train::Ablation::ml, train::Ablation::as_full}) {
    auto cfg = base;
    cfg.apply_ablation(ab);
    const auto branch = train::initial_branch(cfg);
    const auto net = train::initial_network(cfg, &branch);
    const train::MainStepper stepper(cfg, td);
    auto bundle = stepper.forward(net, batch);
    const double before = stepper.generator_components(net, bundle, batch).c.item();
    std::uint64_t seed = 50;
    for (Tensor* t : {&bundle.F_sl2, &bundle.F_sb2, &bundle.F_tl2, &bundle.F_tb2}) {
      *t = diff::add(*t, rand_tensor(t->shape(), ++seed));
    }
    const double after = stepper.generator_components(net, bundle, batch).c.item();
    const bool as_on = ab == train::Ablation::as_full;
    const std::size_t masked = std::count(stepper.pair_mask().begin(), stepper.pair_mask().end(), false);
    if (as_on) {
      v.check(masked == 0 && after != before, "AS-full uses the intermediate pairs");
    } else {
      v.check(masked == 4 && after == before, train::to_string(ab) + " zeroes the four intermediate pairs");
    }
    moved += std::string(moved.empty() ? "" : ", ") + train::to_string(ab) + " dL_c " + num("%.3g", after - before);
  }
  v.note(moved);
  return v;
}

// 8 -------------------------------------------------------------------------------------

Verdict determinism() {
  Verdict v;
  testing::TempDir dir("aurecon_accept_det");
  data::SynthSpec spec;
  spec.image_size = 40;
  spec.source_train = 12;
  spec.target_train = 12;
  spec.source_test = 4;
  spec.target_test = 4;
  const auto m = data::synth_dataset(spec, 8, dir.path());
  train::TrainConfig cfg;
  cfg.geom = {36, 32};
  cfg.block.resolution = 32;
  cfg.block.widths = {4, 6, 6, 8, 8};
  cfg.block.fc_hidden = 12;
  cfg.block.n_au = m.n_au;
  cfg.block.n_land = m.schema.train_landmarks.size();
  cfg.batch_size = 4;
  cfg.main_lr = 1e-3;
  cfg.main_epochs = 2;
  cfg.seed = 21;
  const auto src = data::load_split(m, data::Domain::source, data::Split::train, cfg.geom);
  const auto tgt = data::load_split(m, data::Domain::target, data::Split::train, cfg.geom);
  const auto val = data::load_split(m, data::Domain::source, data::Split::test, cfg.geom);
  const auto td = train::TrainData::from_manifest(m, src, tgt, &val);
  const auto branch = train::initial_branch(cfg);
  auto run = [&] {
    train::RunLog log;
    train::train_main(cfg, td, &branch, log);
    return log;
  };
  const auto a = run(), b = run();
  bool same = a.steps().size() == b.steps().size() && !a.steps().empty();
  for (std::size_t i = 0; same && i < a.steps().size(); ++i) same = a.steps()[i].values == b.steps()[i].values;
  v.check(same, "stage-2 loss sequence bit-exact across runs");

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 200, n_au = 5;
  std::vector<std::vector<double>> probs(n, std::vector<double>(n_au));
  std::vector<std::vector<int>> labels(n, std::vector<int>(n_au));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n_au; ++k) {
      probs[i][k] = u(rng);
      labels[i][k] = u(rng) < 0.4;
    }
  }
  eval::ConfusionCounts seq(n_au), shuffled(n_au), merged(n_au);
  for (std::size_t i = 0; i < n; ++i) seq.update(probs[i], labels[i]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (auto i : order) shuffled.update(probs[i], labels[i]);
  std::vector<eval::ConfusionCounts> shards(7, eval::ConfusionCounts(n_au));
  for (std::size_t i = 0; i < n; ++i) shards[order[i] % 7].update(probs[order[i]], labels[order[i]]);
  for (const auto& s : shards) merged.merge(s);
  v.check(shuffled == seq, "metrics order-invariant");
  v.check(merged == seq && eval::report(merged).to_text() == eval::report(seq).to_text(), "metrics shard-mergeable");
  v.note(std::to_string(a.steps().size()) + " steps compared bit-exactly; 7 shards merged");
  return v;
}

// 9 -------------------------------------------------------------------------------------

Verdict metrics_oracle() {
  Verdict v;
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u(0, 1);
  std::size_t compared = 0;
  for (int set = 0; set < 1000; ++set) {
    const std::size_t n_au = 1 + rng() % 8, n = 1 + rng() % 60;
    const double thr = 0.1 + 0.8 * u(rng);
    std::vector<double> p(n * n_au);
    std::vector<int> y(n * n_au);
    for (auto& x : p) x = rng() % 8 == 0 ? thr : u(rng);
    for (auto& x : y) x = u(rng) < 0.35;
    eval::ConfusionCounts c(n_au);
    for (std::size_t i = 0; i < n; ++i) {
      c.update(std::span(p).subspan(i * n_au, n_au), std::span(y).subspan(i * n_au, n_au), thr);
    }
    for (std::size_t k = 0; k < n_au; ++k) {
      // Recount from scratch: build the prediction column, then compare with labels.
      std::vector<int> pred, truth;
      for (std::size_t i = 0; i < n; ++i) {
        pred.push_back(p[i * n_au + k] >= thr ? 1 : 0);
        truth.push_back(y[i * n_au + k]);
      }
      double hits = 0, tp = 0, predicted = 0, actual = 0;
      for (std::size_t i = 0; i < n; ++i) {
        hits += pred[i] == truth[i];
        tp += pred[i] && truth[i];
        predicted += pred[i];
        actual += truth[i];
      }
      const double f1 = predicted + actual == 0 ? 0.0 : 2.0 * tp / (predicted + actual);
      const double acc = hits / static_cast<double>(n);
      if (eval::f1(c.at(k)) != f1 || eval::accuracy(c.at(k)) != acc) {
        v.check(false, "set " + std::to_string(set) + " AU " + std::to_string(k));
        return v;
      }
      ++compared;
    }
  }
  v.note("1000 sets, " + std::to_string(compared) + " per-AU F1/accuracy pairs exact");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"loss identities", loss_identities},
      {"shape contract", shape_contract},
      {"cross-cycle oracle", cross_cycle_oracle},
      {"overfit convergence", overfit_convergence},
      {"end-to-end learning signal", end_to_end},
      {"ablation structure", ablation_structure},
      {"determinism", determinism},
      {"metrics oracle", metrics_oracle},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(static_cast<std::size_t>(std::atoi(argv[i])));
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    all = all && v.pass;
    std::cout << "criterion " << i + 1 << " " << (v.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ": "
              << v.detail << std::endl;
  }
  return all ? 0 : 1;
}
