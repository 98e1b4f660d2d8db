#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aurecon/common/error.hpp"
#include "aurecon/datapipe/batches.hpp"
#include "aurecon/evalmod/metrics.hpp"
#include "aurecon/netblocks/network.hpp"
#include "aurecon/trainer/config.hpp"
#include "aurecon/trainer/runlog.hpp"

namespace aurecon::train {

namespace fs = std::filesystem;

/// A stage hit a non-finite value. `last_good` names the checkpoint written
/// with the parameters from before the failing step (empty if none was written).
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, fs::path last_good) : Error(what), last_good_(std::move(last_good)) {}
  const fs::path& last_good() const { return last_good_; }

 private:
  fs::path last_good_;
};

/// Datasets and statistics feeding the joint stage. `target` samples need
/// landmark pseudo-labels but no AU labels; `validation` must be AU-labelled.
struct TrainData {
  const data::Dataset* source = nullptr;
  const data::Dataset* target = nullptr;
  const data::Dataset* validation = nullptr;
  std::vector<double> au_rates;
  /// Aligned-frame normalised mean landmarks, all schema points.
  std::vector<double> mean_face;

  static TrainData from_manifest(const data::Manifest& m, const data::Dataset& source, const data::Dataset& target,
                                 const data::Dataset* validation);
};

// Checkpoints ---------------------------------------------------------------------

struct TrainingState {
  std::string stage;
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  std::optional<double> val_metric;
};

/// Network checkpoint whose manifest also carries the training state and config.
diff::Checkpoint make_checkpoint(nets::NetworkSet& nets, const TrainingState& state, const TrainConfig& cfg);
void save_network(const fs::path& path, nets::NetworkSet& nets, const TrainingState& state, const TrainConfig& cfg);

struct RestoredNetwork {
  nets::NetworkSet nets;
  TrainingState state;
  TrainConfig config;
};
RestoredNetwork restore_network(const diff::Checkpoint& ckpt);
RestoredNetwork restore_network(const fs::path& path);

diff::Checkpoint make_branch_checkpoint(nets::LandmarkBranch& branch, const TrainingState& state);
nets::LandmarkBranch restore_branch(const diff::Checkpoint& ckpt);
nets::LandmarkBranch restore_branch(const fs::path& path);

// Evaluation -------------------------------------------------------------------------

/// E_au applied to E_f features of centred crops.
eval::ConfusionCounts evaluate_au(const nets::NetworkSet& nets, const data::Dataset& ds, double threshold,
                                  std::size_t batch_size = 32);
/// Mean absolute coordinate error over the training landmarks of centred
/// crops, in units of each sample's inter-ocular distance.
double landmark_error(const nets::LandmarkBranch& branch, const data::Dataset& ds, std::size_t batch_size = 32);

// Stage 1 ---------------------------------------------------------------------------------

/// The branch stage 1 starts from; a pure function of (block config, seed).
nets::LandmarkBranch initial_branch(const TrainConfig& cfg);

struct PretrainResult {
  nets::LandmarkBranch branch;
  std::optional<std::size_t> best_epoch;  // empty when no epoch ran
  double best_error = 0.0;
  std::uint64_t steps = 0;
};

/// Trains the landmark branch alone on `train` with landmark_loss and keeps
/// the epoch with the lowest landmark_error on `validation` (on `train`
/// when null). With a non-empty `out_dir` the best branch is saved as
/// pretrain_best.ckpt.
PretrainResult pretrain_landmark_branch(const TrainConfig& cfg, const data::Dataset& train,
                                        const data::Dataset* validation, RunLog& log, const fs::path& out_dir = {});

// Stage 2 ---------------------------------------------------------------------------------

/// Loss values and discriminator scores of one optimizer step, in log order.
using StepValues = Values;

/// One alternation step on a paired batch. The discriminator step sees
/// detached features and updates D_l and D_d only; the generator step
/// freezes both discriminators and updates everything else.
class MainStepper {
 public:
  MainStepper(const TrainConfig& cfg, const TrainData& data);

  nets::FeatureBundle forward(const nets::NetworkSet& nets, const data::PairedBatch& batch) const;
  StepValues discriminator_step(nets::NetworkSet& nets, const nets::FeatureBundle& bundle,
                                const data::PairedBatch& batch, double lr) const;
  StepValues generator_step(nets::NetworkSet& nets, const nets::FeatureBundle& bundle, const data::PairedBatch& batch,
                            double lr) const;
  /// forward, cfg.d_steps discriminator steps, one generator step.
  StepValues step(nets::NetworkSet& nets, const data::PairedBatch& batch, double lr) const;

  /// Generator-side objective components on a bundle (no update).
  loss::LossComponents generator_components(const nets::NetworkSet& nets, const nets::FeatureBundle& bundle,
                                            const data::PairedBatch& batch) const;
  const loss::PairMask& pair_mask() const { return mask_; }

 private:
  loss::LandmarkTarget targets(const data::Batch& b) const;

  TrainConfig cfg_;
  std::vector<double> class_weights_;
  std::vector<double> mean_face_;  // crop frame, training landmarks
  loss::PairMask mask_;
};

/// Builds the stage-2 starting point: fresh blocks from the seed, the
/// pretrained branch copied in, E_f transfer-initialised when ML is on,
/// identity projectors when AS is off.
nets::NetworkSet initial_network(const TrainConfig& cfg, const nets::LandmarkBranch* pretrained);

struct EpochCheckpoint {
  std::string stage;
  std::size_t epoch = 0;
  double val_f1 = 0.0;
  diff::Checkpoint image;
  fs::path path;  // empty when not written
};

struct MainResult {
  nets::NetworkSet nets;
  std::vector<EpochCheckpoint> checkpoints;  // one per finished epoch with validation data
  std::uint64_t steps = 0;
};

MainResult train_main(const TrainConfig& cfg, const TrainData& data, const nets::LandmarkBranch* pretrained,
                      RunLog& log, const fs::path& out_dir = {});

struct FinalModel {
  nets::NetworkSet nets;
  std::size_t selected_epoch = 0;
  bool fine_tuned = false;  // true when the fine-tuned model validated higher
  double val_f1 = 0.0;
};

/// Picks the checkpoint with the highest validation mean F1 (earliest epoch on
/// ties), fine-tunes it at main_lr * finetune_lr_scale for finetune_epochs and
/// returns whichever of the two validates higher.
FinalModel select_and_finetune(const TrainConfig& cfg, const std::vector<EpochCheckpoint>& checkpoints,
                               const TrainData& data, RunLog& log, const fs::path& out_dir = {});

}  // namespace aurecon::train
