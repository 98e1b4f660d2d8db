#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "aurecon/datapipe/align.hpp"
#include "aurecon/diffcore/optimizer.hpp"
#include "aurecon/losses/losses.hpp"
#include "aurecon/netblocks/blocks.hpp"

namespace aurecon::train {

/// Component toggles: BL (neither), ML (multi-task landmark branch), AS-full (ML plus all six alignment pairs).
enum class Ablation { bl, ml, as_full };
Ablation parse_ablation(const std::string& s);
std::string to_string(Ablation a);

struct TrainConfig {
  nets::BlockConfig block;
  data::Geometry geom;
  loss::LossWeights weights;
  diff::OptimizerConfig optim;
  std::size_t batch_size = 8;
  bool augment = true;

  // Stage 1: landmark branch.
  double pretrain_lr = 1e-4;
  std::size_t pretrain_epochs = 20;

  // Stage 2: joint training.
  double main_lr = 1e-4;
  std::size_t main_epochs = 12;
  std::size_t decay_every = 4;
  /// Explicit per-epoch learning rates; overrides the stepped decay when set.
  std::vector<double> lr_table;
  std::size_t d_steps = 1;  // discriminator updates per paired batch
  /// Stops a stage after this many optimizer steps (0 = no limit).
  std::size_t max_steps = 0;

  // Fine-tuning of the selected checkpoint.
  double finetune_lr_scale = 0.1;
  std::size_t finetune_epochs = 2;

  bool enable_ml = true;
  bool enable_as = true;
  bool tied_extractor = false;
  double threshold = 0.5;
  std::uint64_t seed = 1;

  void apply_ablation(Ablation a);
  /// Throws on non-positive rates, empty batches, bad thresholds or an
  /// lr table that increases or has the wrong length.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Stage-2 learning rate for a zero-based epoch. Without a table the rate
/// is base * (1 - floor(e / decay_every) / ceil(epochs / decay_every)).
double main_lr_at(const TrainConfig& cfg, std::size_t epoch);

}  // namespace aurecon::train
