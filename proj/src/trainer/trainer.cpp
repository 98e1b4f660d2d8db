#include "aurecon/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include "aurecon/diffcore/ops.hpp"
#include "aurecon/diffcore/optimizer.hpp"

namespace aurecon::train {

namespace d = aurecon::diff;
using nets::NamedStores;
using nets::NetworkSet;

namespace {

constexpr std::uint64_t kPretrainTag = 1;
constexpr std::uint64_t kMainTag = 2;
constexpr std::uint64_t kFinetuneTag = 3;

nlohmann::json state_json(const TrainingState& s) {
  nlohmann::json j = {{"stage", s.stage}, {"epoch", s.epoch}, {"step", s.step}, {"val_metric", nullptr}};
  if (s.val_metric) j["val_metric"] = *s.val_metric;
  return j;
}

TrainingState state_from(const nlohmann::json& j) {
  TrainingState s{j.at("stage").get<std::string>(), j.at("epoch").get<std::size_t>(),
                  j.at("step").get<std::uint64_t>(), std::nullopt};
  if (!j.at("val_metric").is_null()) s.val_metric = j.at("val_metric").get<double>();
  return s;
}

nlohmann::json parse_manifest_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
}

void clear_grads(const NamedStores& stores) {
  for (const auto& [name, ps] : stores) ps->clear_grad();
}

void step_all(const NamedStores& stores, const d::OptimizerConfig& optim, double lr) {
  for (const auto& [name, ps] : stores) d::optimizer_step(*ps, optim, lr);
}

void require_finite_params(const NamedStores& stores) {
  for (const auto& [name, ps] : stores) {
    for (const auto& e : ps->entries()) {
      for (double v : e.value.data()) {
        if (!std::isfinite(v)) throw NonFiniteError("parameter " + name + "." + e.name + " became non-finite");
      }
    }
  }
}

double mean_of(const d::Tensor& t) {
  const auto v = t.data();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Disables gradient tracking on a set of stores for one scope.
class Freeze {
 public:
  explicit Freeze(NamedStores stores) : stores_(std::move(stores)) {
    for (const auto& [name, ps] : stores_) ps->set_requires_grad(false);
  }
  ~Freeze() {
    for (const auto& [name, ps] : stores_) ps->set_requires_grad(true);
  }
  Freeze(const Freeze&) = delete;
  Freeze& operator=(const Freeze&) = delete;

 private:
  NamedStores stores_;
};

std::vector<std::vector<std::size_t>> chunks(std::size_t n, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += size) {
    std::vector<std::size_t> idx(std::min(size, n - i));
    std::iota(idx.begin(), idx.end(), i);
    out.push_back(std::move(idx));
  }
  return out;
}

fs::path epoch_path(const fs::path& dir, const std::string& stage, std::size_t epoch) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_epoch_%02zu.ckpt", stage.c_str(), epoch + 1);
  return dir / buf;
}

/// Stores the generator step updates: projectors are skipped while they act
/// as the identity, E_f while it is tied to the landmark branch.
NamedStores update_stores(NetworkSet& nets, bool with_branch) {
  NamedStores out;
  const bool identity = !nets.projectors.empty() && nets.projectors.front().identity();
  for (auto& [name, ps] : nets.generator_stores(with_branch || nets.tied_extractor)) {
    if (identity && name.rfind("P_", 0) == 0) continue;
    out.emplace_back(name, ps);
  }
  return out;
}

}  // namespace

TrainData TrainData::from_manifest(const data::Manifest& m, const data::Dataset& source, const data::Dataset& target,
                                   const data::Dataset* validation) {
  return TrainData{&source, &target, validation, m.stats.au_rates, m.stats.mean_face};
}

// Checkpoints -------------------------------------------------------------------------

diff::Checkpoint make_checkpoint(NetworkSet& nets, const TrainingState& state, const TrainConfig& cfg) {
  auto ck = nets::to_checkpoint(nets);
  auto manifest = parse_manifest_json(ck.manifest);
  manifest["training"] = state_json(state);
  manifest["train_config"] = cfg.to_json();
  ck.manifest = manifest.dump();
  return ck;
}

void save_network(const fs::path& path, NetworkSet& nets, const TrainingState& state, const TrainConfig& cfg) {
  d::save_checkpoint(path, make_checkpoint(nets, state, cfg));
}

RestoredNetwork restore_network(const diff::Checkpoint& ckpt) {
  const auto manifest = parse_manifest_json(ckpt.manifest);
  if (!manifest.contains("training") || !manifest.contains("train_config")) {
    throw FormatError("checkpoint carries no training state");
  }
  TrainingState state;
  TrainConfig cfg;
  try {
    state = state_from(manifest.at("training"));
    cfg = TrainConfig::from_json(manifest.at("train_config"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint training state: ") + e.what());
  }
  return {nets::from_checkpoint(ckpt), std::move(state), std::move(cfg)};
}

RestoredNetwork restore_network(const fs::path& path) {
  if (!fs::exists(path)) throw Error("checkpoint " + path.string() + " does not exist");
  return restore_network(d::load_checkpoint(path));
}

diff::Checkpoint make_branch_checkpoint(nets::LandmarkBranch& branch, const TrainingState& state) {
  diff::Checkpoint ck;
  nlohmann::json manifest = {{"format", "aurecon.landmarkbranch"},
                             {"config", branch.cfg.to_json()},
                             {"blocks", nlohmann::json::array()},
                             {"training", state_json(state)}};
  for (auto& [name, ps] : branch.stores()) {
    manifest["blocks"].push_back(name);
    ck.add_store(name + "/", *ps);
  }
  ck.manifest = manifest.dump();
  return ck;
}

nets::LandmarkBranch restore_branch(const diff::Checkpoint& ckpt) {
  const auto manifest = parse_manifest_json(ckpt.manifest);
  if (manifest.value("format", "") != "aurecon.landmarkbranch") {
    throw FormatError("checkpoint does not hold a landmark branch");
  }
  d::Rng rng(0);
  auto branch = nets::build_landmark_branch(nets::BlockConfig::from_json(manifest.at("config")), rng);
  for (auto& [name, ps] : branch.stores()) ckpt.restore_store(name + "/", *ps);
  return branch;
}

nets::LandmarkBranch restore_branch(const fs::path& path) {
  if (!fs::exists(path)) throw Error("checkpoint " + path.string() + " does not exist");
  return restore_branch(d::load_checkpoint(path));
}

// Evaluation ------------------------------------------------------------------------------

eval::ConfusionCounts evaluate_au(const NetworkSet& nets, const data::Dataset& ds, double threshold,
                                  std::size_t batch_size) {
  eval::ConfusionCounts counts(nets.cfg.n_au);
  for (const auto& idx : chunks(ds.size(), batch_size)) {
    const auto b = data::make_batch(ds, idx, false, 0);
    if (!b.au.defined()) throw Error("evaluate_au: dataset contains samples without AU labels");
    counts.update(nets::au_head_forward(nets.eau, nets::extract_features(nets, b.images)), b.au, threshold);
  }
  return counts;
}

double landmark_error(const nets::LandmarkBranch& branch, const data::Dataset& ds, std::size_t batch_size) {
  if (ds.size() == 0) throw Error("landmark_error: empty dataset");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& idx : chunks(ds.size(), batch_size)) {
    const auto b = data::make_batch(ds, idx, false, 0);
    const auto pred = nets::forward_landmarks(branch, b.images);
    const std::size_t k = pred.dim(1);
    for (std::size_t i = 0; i < b.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        total += std::abs(pred.at(i * k + j) - b.landmarks.at(i * k + j)) / b.iod[i];
      }
      count += k;
    }
  }
  return total / static_cast<double>(count);
}

// Stage 1 -----------------------------------------------------------------------------------

nets::LandmarkBranch initial_branch(const TrainConfig& cfg) {
  d::Rng rng(cfg.seed);
  return nets::build_landmark_branch(cfg.block, rng);
}

PretrainResult pretrain_landmark_branch(const TrainConfig& cfg, const data::Dataset& train,
                                        const data::Dataset* validation, RunLog& log, const fs::path& out_dir) {
  cfg.validate();
  const data::Dataset& val = validation ? *validation : train;
  PretrainResult res{initial_branch(cfg), std::nullopt, 0.0, 0};
  if (cfg.pretrain_epochs == 0) {
    res.best_error = landmark_error(res.branch, val);
    return res;
  }
  if (train.size() < cfg.batch_size) {
    throw Error("pretrain: " + std::to_string(train.size()) + " source samples cannot fill a batch of " +
                std::to_string(cfg.batch_size));
  }
  auto branch = res.branch.clone();
  const auto stores = branch.stores();
  const std::uint64_t seed = data::mix_seed(cfg.seed, kPretrainTag);
  const data::BatchPlan plan(train.size(), 0, cfg.batch_size, seed);
  bool stop = false;
  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs && !stop; ++epoch) {
    for (const auto& pi : plan.epoch(epoch)) {
      if (cfg.max_steps != 0 && res.steps >= cfg.max_steps) {
        stop = true;
        break;
      }
      const std::uint64_t step = log.last_step() + 1;
      const auto batch = data::make_batch(train, pi.source, cfg.augment, data::mix_seed(seed, epoch, step));
      auto last_good = branch.clone();
      double value = 0.0;
      try {
        clear_grads(stores);
        auto loss = loss::landmark_loss(nets::forward_landmarks(branch, batch.images), {batch.landmarks, batch.iod});
        value = loss.item();
        loss.backward();
        step_all(stores, cfg.optim, cfg.pretrain_lr);
        require_finite_params(stores);
      } catch (const NonFiniteError& e) {
        fs::path saved;
        if (!out_dir.empty()) {
          saved = out_dir / "pretrain_last_good.ckpt";
          d::save_checkpoint(saved, make_branch_checkpoint(last_good, {"pretrain", epoch, step, std::nullopt}));
        }
        throw TrainingAborted("pretrain step " + std::to_string(step) + " (epoch " + std::to_string(epoch + 1) +
                                  "): " + e.what(),
                              saved);
      }
      log.record_step({"pretrain", step, epoch, cfg.pretrain_lr, {{"L_fl", value}}});
      ++res.steps;
    }
    const double err = landmark_error(branch, val);
    std::string written;
    if (!res.best_epoch || err < res.best_error) {
      res.best_epoch = epoch;
      res.best_error = err;
      res.branch = branch.clone();
      if (!out_dir.empty()) {
        const auto path = out_dir / "pretrain_best.ckpt";
        d::save_checkpoint(path, make_branch_checkpoint(branch, {"pretrain", epoch, log.last_step(), err}));
        written = path.string();
      }
    }
    log.record_epoch({"pretrain", epoch, {{"val_landmark_error", err}}, written});
  }
  return res;
}

// Stage 2 -----------------------------------------------------------------------------------

MainStepper::MainStepper(const TrainConfig& cfg, const TrainData& data) : cfg_(cfg) {
  cfg_.validate();
  if (!data.source) throw Error("joint training needs a source dataset");
  const auto& schema = data.source->schema;
  if (schema.train_landmarks.size() != cfg_.block.n_land) {
    throw ShapeError("schema trains " + std::to_string(schema.train_landmarks.size()) +
                     " landmarks but the network regresses " + std::to_string(cfg_.block.n_land));
  }
  if (data.au_rates.size() != cfg_.block.n_au) {
    throw ShapeError(std::to_string(data.au_rates.size()) + " AU rates for " + std::to_string(cfg_.block.n_au) +
                     " AUs");
  }
  class_weights_ = loss::au_class_weights(data.au_rates);
  if (data.mean_face.empty()) throw Error("joint training needs the mean face of the source training split");
  mean_face_ = data::select_landmarks(data::to_crop_frame(data.mean_face, cfg_.geom), schema);
  mask_ = cfg_.enable_as ? loss::kAllPairs : loss::kCyclePairsOnly;
}

loss::LandmarkTarget MainStepper::targets(const data::Batch& b) const { return {b.landmarks, b.iod}; }

nets::FeatureBundle MainStepper::forward(const NetworkSet& nets, const data::PairedBatch& batch) const {
  return nets::full_graph_forward(nets, batch.source.images, batch.target.images);
}

StepValues MainStepper::discriminator_step(NetworkSet& nets, const nets::FeatureBundle& bundle,
                                           const data::PairedBatch& batch, double lr) const {
  const auto src = targets(batch.source), tgt = targets(batch.target);
  const auto stores = nets.discriminator_stores();
  clear_grads(stores);

  loss::LossComponents parts;
  parts.l = loss::landmark_feature_loss(nets.dl, bundle.F_sl.detach(), bundle.F_tl.detach(), src, tgt);
  parts.adl = loss::adversarial_landmark_losses(nets.dl, bundle.F_sb, bundle.F_tb, src, tgt, mean_face_).d_step;
  parts.adf = loss::adversarial_domain_losses(nets.dd, bundle).d_step;
  loss::LossWeights w = cfg_.weights;
  w.c = w.au = w.fl = 0.0;

  StepValues out = {
      {"Dd_s", mean_of(nets::d_domain_forward(nets.dd, bundle.F_s.detach()))},
      {"Dd_t", mean_of(nets::d_domain_forward(nets.dd, bundle.F_t.detach()))},
      {"Dd_sltb", mean_of(nets::d_domain_forward(nets.dd, bundle.F_sltb.detach()))},
      {"Dd_sbtl", mean_of(nets::d_domain_forward(nets.dd, bundle.F_sbtl.detach()))},
  };
  auto total = loss::total_loss(w, parts);
  out.insert(out.begin(), {{"L_l_d", parts.l.item()},
                           {"L_adl_d", parts.adl.item()},
                           {"L_adf_d", parts.adf.item()},
                           {"d_total", total.item()}});
  total.backward();
  step_all(stores, cfg_.optim, lr);
  return out;
}

loss::LossComponents MainStepper::generator_components(const NetworkSet& nets, const nets::FeatureBundle& bundle,
                                                       const data::PairedBatch& batch) const {
  if (!batch.source.au.defined()) throw Error("source batch has samples without AU labels");
  const auto src = targets(batch.source), tgt = targets(batch.target);
  loss::LossComponents parts;
  parts.c = loss::contrastive_alignment_loss(bundle, nets.projectors, mask_);
  parts.l = loss::landmark_feature_loss(nets.dl, bundle.F_sl, bundle.F_tl, src, tgt);
  parts.adl = loss::adversarial_landmark_losses(nets.dl, bundle.F_sb, bundle.F_tb, src, tgt, mean_face_).g_step;
  parts.adf = loss::adversarial_domain_losses(nets.dd, bundle).g_step;
  const loss::AuTarget au{batch.source.au, class_weights_};
  parts.au = d::add(loss::au_loss(nets::au_head_forward(nets.eau, bundle.F_s), au),
                    loss::au_loss(nets::au_head_forward(nets.eau, bundle.F_sltb), au));
  if (cfg_.enable_ml) parts.fl = loss::landmark_loss(nets::forward_landmarks(nets.branch, batch.source.images), src);
  return parts;
}

StepValues MainStepper::generator_step(NetworkSet& nets, const nets::FeatureBundle& bundle,
                                       const data::PairedBatch& batch, double lr) const {
  const auto stores = update_stores(nets, cfg_.enable_ml);
  const Freeze frozen(nets.discriminator_stores());
  clear_grads(stores);
  const auto parts = generator_components(nets, bundle, batch);
  loss::LossWeights w = cfg_.weights;
  if (!cfg_.enable_ml) w.fl = 0.0;
  auto total = loss::total_loss(w, parts);
  StepValues out = {{"L_c", parts.c.item()},     {"L_l", parts.l.item()},   {"L_adl_g", parts.adl.item()},
                    {"L_adf_g", parts.adf.item()}, {"L_au", parts.au.item()}, {"L_fl", parts.fl.defined() ? parts.fl.item() : 0.0},
                    {"g_total", total.item()}};
  total.backward();
  step_all(stores, cfg_.optim, lr);
  return out;
}

StepValues MainStepper::step(NetworkSet& nets, const data::PairedBatch& batch, double lr) const {
  const auto bundle = forward(nets, batch);
  StepValues out;
  for (std::size_t k = 0; k < cfg_.d_steps; ++k) out = discriminator_step(nets, bundle, batch, lr);
  auto g = generator_step(nets, bundle, batch, lr);
  out.insert(out.end(), g.begin(), g.end());
  return out;
}

NetworkSet initial_network(const TrainConfig& cfg, const nets::LandmarkBranch* pretrained) {
  cfg.validate();
  auto nets = nets::build_network_set(cfg.block, cfg.seed);
  if (cfg.enable_ml) {
    if (!pretrained) throw Error("the multi-task configuration needs a pretrained landmark branch");
    if (!(pretrained->cfg == cfg.block)) throw ShapeError("pretrained branch was built with a different block config");
    nets.branch = pretrained->clone();
    nets::transfer_init(nets.ef, nets.branch);
    nets.tied_extractor = cfg.tied_extractor;
    if (nets.tied_extractor) {
      for (auto& [name, ps] : nets.ef.stores()) ps->set_requires_grad(false);
    }
  }
  nets.set_identity_projectors(!cfg.enable_as);
  return nets;
}

namespace {

struct StagePlan {
  std::string name;
  std::size_t epochs = 0;
  std::function<double(std::size_t)> lr;
  std::uint64_t tag = 0;
};

/// Runs the alternation over whole epochs of paired batches, validating and
/// checkpointing after each one. Returns the number of steps taken.
std::uint64_t run_joint(NetworkSet& nets, const TrainConfig& cfg, const TrainData& data, const StagePlan& plan,
                        RunLog& log, const fs::path& out_dir, std::vector<EpochCheckpoint>& checkpoints) {
  if (!data.source || !data.target || data.target->size() == 0) {
    throw Error(plan.name + ": joint training needs source and target datasets");
  }
  const MainStepper stepper(cfg, data);
  const std::uint64_t seed = data::mix_seed(cfg.seed, plan.tag);
  std::uint64_t steps = 0;
  bool stop = false;
  for (std::size_t epoch = 0; epoch < plan.epochs && !stop; ++epoch) {
    const double lr = plan.lr(epoch);
    data::PairedBatches batches(*data.source, *data.target, cfg.batch_size, seed, epoch, cfg.augment);
    if (batches.size() == 0) {
      throw Error(plan.name + ": " + std::to_string(data.source->size()) + " source samples cannot fill a batch of " +
                  std::to_string(cfg.batch_size));
    }
    data::PairedBatch batch;
    while (batches.next(batch)) {
      if (cfg.max_steps != 0 && steps >= cfg.max_steps) {
        stop = true;
        break;
      }
      const std::uint64_t step = log.last_step() + 1;
      auto last_good = nets.clone();
      StepValues values;
      try {
        values = stepper.step(nets, batch, lr);
        require_finite_params(nets.stores());
      } catch (const NonFiniteError& e) {
        fs::path saved;
        if (!out_dir.empty()) {
          saved = out_dir / (plan.name + "_last_good.ckpt");
          save_network(saved, last_good, {plan.name, epoch, step, std::nullopt}, cfg);
        }
        throw TrainingAborted(plan.name + " step " + std::to_string(step) + " (epoch " + std::to_string(epoch + 1) +
                                  "): " + e.what(),
                              saved);
      }
      log.record_step({plan.name, step, epoch, lr, std::move(values)});
      ++steps;
    }

    EpochRecord rec{plan.name, epoch, {}, ""};
    TrainingState state{plan.name, epoch, log.last_step(), std::nullopt};
    if (data.validation) {
      const auto rep = eval::report(evaluate_au(nets, *data.validation, cfg.threshold));
      rec.metrics = {{"val_mean_f1", rep.mean_f1}, {"val_mean_accuracy", rep.mean_accuracy}};
      state.val_metric = rep.mean_f1;
    }
    auto image = make_checkpoint(nets, state, cfg);
    fs::path path;
    if (!out_dir.empty()) {
      path = epoch_path(out_dir, plan.name, epoch);
      d::save_checkpoint(path, image);
      rec.checkpoint = path.string();
    }
    if (state.val_metric) checkpoints.push_back({plan.name, epoch, *state.val_metric, std::move(image), path});
    log.record_epoch(std::move(rec));
  }
  return steps;
}

}  // namespace

MainResult train_main(const TrainConfig& cfg, const TrainData& data, const nets::LandmarkBranch* pretrained,
                      RunLog& log, const fs::path& out_dir) {
  MainResult res{initial_network(cfg, pretrained), {}, 0};
  const StagePlan plan{"main", cfg.main_epochs, [&cfg](std::size_t e) { return main_lr_at(cfg, e); }, kMainTag};
  res.steps = run_joint(res.nets, cfg, data, plan, log, out_dir, res.checkpoints);
  return res;
}

FinalModel select_and_finetune(const TrainConfig& cfg, const std::vector<EpochCheckpoint>& checkpoints,
                               const TrainData& data, RunLog& log, const fs::path& out_dir) {
  if (checkpoints.empty()) throw Error("select_and_finetune: no checkpoints with validation metrics");
  const EpochCheckpoint* best = &checkpoints.front();
  for (const auto& c : checkpoints) {
    if (c.val_f1 > best->val_f1 || (c.val_f1 == best->val_f1 && c.epoch < best->epoch)) best = &c;
  }
  auto selected = restore_network(best->image);
  FinalModel out{std::move(selected.nets), best->epoch, false, best->val_f1};
  if (cfg.finetune_epochs == 0) return out;
  if (!data.validation) throw Error("select_and_finetune: fine-tuning needs a validation dataset");

  auto tuned = out.nets.clone();
  const double lr = cfg.main_lr * cfg.finetune_lr_scale;
  const StagePlan plan{"finetune", cfg.finetune_epochs, [lr](std::size_t) { return lr; }, kFinetuneTag};
  std::vector<EpochCheckpoint> ignored;
  run_joint(tuned, cfg, data, plan, log, out_dir, ignored);
  const double f1 = eval::report(evaluate_au(tuned, *data.validation, cfg.threshold)).mean_f1;
  if (f1 > out.val_f1) {
    out.nets = std::move(tuned);
    out.fine_tuned = true;
    out.val_f1 = f1;
  }
  return out;
}

}  // namespace aurecon::train
