#include "aurecon/trainer/config.hpp"

#include <cmath>

#include "aurecon/common/error.hpp"

namespace aurecon::train {

Ablation parse_ablation(const std::string& s) {
  if (s == "BL") return Ablation::bl;
  if (s == "ML") return Ablation::ml;
  if (s == "AS-full") return Ablation::as_full;
  throw Error("unknown ablation '" + s + "' (expected BL, ML or AS-full)");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::bl:
      return "BL";
    case Ablation::ml:
      return "ML";
    case Ablation::as_full:
      return "AS-full";
  }
  return "?";
}

void TrainConfig::apply_ablation(Ablation a) {
  enable_ml = a != Ablation::bl;
  enable_as = a == Ablation::as_full;
}

void TrainConfig::validate() const {
  block.validate();
  geom.validate();
  weights.validate();
  if (geom.crop != block.resolution) {
    throw Error("crop size " + std::to_string(geom.crop) + " must equal the network resolution " +
                std::to_string(block.resolution));
  }
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string(name) + " must be a positive finite number");
  };
  positive(pretrain_lr, "pretrain_lr");
  positive(main_lr, "main_lr");
  positive(finetune_lr_scale, "finetune_lr_scale");
  if (batch_size == 0) throw Error("batch_size must be >= 1");
  if (decay_every == 0) throw Error("decay_every must be >= 1");
  if (d_steps == 0) throw Error("d_steps must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("threshold must lie in (0, 1)");
  if (tied_extractor && !enable_ml) throw Error("tied_extractor requires the landmark branch (enable_ml)");
  if (!lr_table.empty()) {
    if (lr_table.size() != main_epochs) {
      throw Error("lr_table has " + std::to_string(lr_table.size()) + " entries for " + std::to_string(main_epochs) +
                  " epochs");
    }
    for (std::size_t i = 0; i < lr_table.size(); ++i) {
      if (!(lr_table[i] >= 0.0) || !std::isfinite(lr_table[i])) throw Error("lr_table entries must be finite and >= 0");
      if (i > 0 && lr_table[i] > lr_table[i - 1]) throw Error("lr_table must be non-increasing");
    }
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"block", block.to_json()},
          {"geometry", {{"aligned", geom.aligned}, {"crop", geom.crop}}},
          {"weights", weights.to_json()},
          {"optimizer",
           {{"rule", optim.rule == diff::UpdateRule::adam ? "adam" : "sgd"},
            {"beta1", optim.beta1},
            {"beta2", optim.beta2},
            {"eps", optim.eps}}},
          {"batch_size", batch_size},
          {"augment", augment},
          {"pretrain_lr", pretrain_lr},
          {"pretrain_epochs", pretrain_epochs},
          {"main_lr", main_lr},
          {"main_epochs", main_epochs},
          {"decay_every", decay_every},
          {"lr_table", lr_table},
          {"d_steps", d_steps},
          {"max_steps", max_steps},
          {"finetune_lr_scale", finetune_lr_scale},
          {"finetune_epochs", finetune_epochs},
          {"enable_ml", enable_ml},
          {"enable_as", enable_as},
          {"tied_extractor", tied_extractor},
          {"threshold", threshold},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.block = nets::BlockConfig::from_json(j.at("block"));
  c.geom.aligned = j.at("geometry").at("aligned").get<std::size_t>();
  c.geom.crop = j.at("geometry").at("crop").get<std::size_t>();
  c.weights = loss::LossWeights::from_json(j.at("weights"));
  const auto& o = j.at("optimizer");
  c.optim.rule = diff::parse_update_rule(o.at("rule").get<std::string>());
  c.optim.beta1 = o.at("beta1").get<double>();
  c.optim.beta2 = o.at("beta2").get<double>();
  c.optim.eps = o.at("eps").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.augment = j.at("augment").get<bool>();
  c.pretrain_lr = j.at("pretrain_lr").get<double>();
  c.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
  c.main_lr = j.at("main_lr").get<double>();
  c.main_epochs = j.at("main_epochs").get<std::size_t>();
  c.decay_every = j.at("decay_every").get<std::size_t>();
  c.lr_table = j.at("lr_table").get<std::vector<double>>();
  c.d_steps = j.at("d_steps").get<std::size_t>();
  c.max_steps = j.at("max_steps").get<std::size_t>();
  c.finetune_lr_scale = j.at("finetune_lr_scale").get<double>();
  c.finetune_epochs = j.at("finetune_epochs").get<std::size_t>();
  c.enable_ml = j.at("enable_ml").get<bool>();
  c.enable_as = j.at("enable_as").get<bool>();
  c.tied_extractor = j.at("tied_extractor").get<bool>();
  c.threshold = j.at("threshold").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

double main_lr_at(const TrainConfig& cfg, std::size_t epoch) {
  if (!cfg.lr_table.empty()) return cfg.lr_table.at(epoch);
  const std::size_t blocks = (cfg.main_epochs + cfg.decay_every - 1) / cfg.decay_every;
  if (blocks == 0) return cfg.main_lr;
  const std::size_t block = std::min(epoch / cfg.decay_every, blocks - 1);
  return cfg.main_lr * (1.0 - static_cast<double>(block) / static_cast<double>(blocks));
}

}  // namespace aurecon::train
