#include "aurecon/cli/app.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include "aurecon/cli/gradsuite.hpp"
#include "aurecon/common/error.hpp"
#include "aurecon/datapipe/synth.hpp"
#include "aurecon/trainer/trainer.hpp"

namespace aurecon::cli {

namespace {

namespace fs = std::filesystem;

const char* kUsage =
    "usage: aurecon <command> [options]\n"
    "\n"
    "commands:\n"
    "  synth      write a synthetic two-domain dataset\n"
    "  pretrain   train the landmark branch alone\n"
    "  train      full pipeline: pretrain (if needed), joint training, selection, fine-tuning\n"
    "  finetune   fine-tune a saved network checkpoint\n"
    "  eval       per-AU F1 / accuracy of a checkpoint on one manifest split\n"
    "  gradcheck  finite-difference check of every block and loss\n"
    "\n"
    "Run 'aurecon <command> --help' for the options of a command.\n";

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void prepare(CLI::App& app) {
  app.set_config("--config", "", "key=value file with option defaults; flags override it");
  // Option names are dotted paths, not nested sections.
  app.get_config_formatter_base()->parentSeparator('/');
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

void echo_config(const CLI::App& app, const fs::path& dir) {
  std::ofstream f(dir / "config.ini");
  f << app.config_to_str(true, false);
  if (!f) throw Error("cannot write " + (dir / "config.ini").string());
}

// Options shared by the training commands -------------------------------------------

struct RunOptions {
  train::TrainConfig cfg;
  std::vector<std::size_t> widths{cfg.block.widths.begin(), cfg.block.widths.end()};
  std::string ablation = "AS-full";
  std::string optim_rule = "adam";
  std::string lr_table;
  std::string manifest;
  std::string out;
  std::string pretrained;
  std::string checkpoint;

  void bind(CLI::App& app) {
    auto& c = cfg;
    app.add_option("--seed", c.seed, "seed for initialisation, shuffling and augmentation")->capture_default_str();
    app.add_option("--manifest", manifest, "dataset manifest (JSONL)")->required();
    app.add_option("--out", out, "run directory")->required();
    app.add_option("--ablation", ablation, "component set: BL, ML or AS-full")
        ->check(CLI::IsMember({"BL", "ML", "AS-full"}))
        ->capture_default_str();

    app.add_option("--weights.c", c.weights.c, "weight of the alignment loss")->capture_default_str();
    app.add_option("--weights.l", c.weights.l, "weight of the landmark-feature loss")->capture_default_str();
    app.add_option("--weights.adl", c.weights.adl, "weight of the landmark adversarial loss")->capture_default_str();
    app.add_option("--weights.adf", c.weights.adf, "weight of the domain adversarial loss")->capture_default_str();
    app.add_option("--weights.au", c.weights.au, "weight of the AU loss")->capture_default_str();
    app.add_option("--weights.fl", c.weights.fl, "weight of the landmark-branch loss")->capture_default_str();

    app.add_option("--block.widths", widths, "channels of the five landmark parts")->expected(5)->capture_default_str();
    app.add_option("--block.fc_hidden", c.block.fc_hidden, "hidden units of the landmark head")->capture_default_str();
    app.add_option("--block.cbam_reduction", c.block.cbam_reduction)->capture_default_str();
    app.add_option("--block.cbam_kernel", c.block.cbam_kernel)->capture_default_str();
    app.add_option("--geometry.aligned", c.geom.aligned, "side of the aligned face image")->capture_default_str();
    app.add_option("--geometry.crop", c.geom.crop, "side of the training crop (network input)")->capture_default_str();

    app.add_option("--optim.rule", optim_rule, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
    app.add_option("--optim.beta1", c.optim.beta1)->capture_default_str();
    app.add_option("--optim.beta2", c.optim.beta2)->capture_default_str();
    app.add_option("--optim.eps", c.optim.eps)->capture_default_str();
    app.add_option("--batch_size", c.batch_size)->capture_default_str();
    app.add_option("--augment", c.augment, "random crop and flip (true/false)")->capture_default_str();

    app.add_option("--pretrain.lr", c.pretrain_lr)->capture_default_str();
    app.add_option("--pretrain.epochs", c.pretrain_epochs)->capture_default_str();
    app.add_option("--main.lr", c.main_lr)->capture_default_str();
    app.add_option("--main.epochs", c.main_epochs)->capture_default_str();
    app.add_option("--main.decay_every", c.decay_every)->capture_default_str();
    app.add_option("--main.lr_table", lr_table, "comma-separated per-epoch rates (empty: stepped decay)")
        ->capture_default_str();
    app.add_option("--main.d_steps", c.d_steps, "discriminator updates per batch")->capture_default_str();
    app.add_option("--max_steps", c.max_steps, "stop each stage after this many steps (0: no limit)")
        ->capture_default_str();
    app.add_option("--finetune.lr_scale", c.finetune_lr_scale)->capture_default_str();
    app.add_option("--finetune.epochs", c.finetune_epochs)->capture_default_str();
    app.add_option("--tied_extractor", c.tied_extractor, "E_f reuses the landmark parts (true/false)")
        ->capture_default_str();
    app.add_option("--threshold", c.threshold, "AU decision threshold")->capture_default_str();
  }

  /// Fills the derived fields once the manifest is known.
  void resolve(const data::Manifest& m) {
    std::copy(widths.begin(), widths.end(), cfg.block.widths.begin());
    cfg.block.resolution = cfg.geom.crop;
    cfg.block.n_au = m.n_au;
    cfg.block.n_land = m.schema.train_landmarks.size();
    cfg.optim.rule = diff::parse_update_rule(optim_rule);
    cfg.apply_ablation(train::parse_ablation(ablation));
    cfg.lr_table.clear();
    std::stringstream ss(lr_table);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.find_first_not_of(" \t") == std::string::npos) continue;
      try {
        cfg.lr_table.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw Error("main.lr_table: cannot parse '" + item + "'");
      }
    }
    cfg.validate();
  }
};

struct Loaded {
  data::Manifest manifest;
  data::Dataset source, target, validation;
  bool has_validation = false;
};

Loaded load_data(RunOptions& o, std::ostream& err) {
  Loaded l;
  l.manifest = data::load_manifest(o.manifest);
  for (const auto& w : l.manifest.warnings) err << "warning: " << w << "\n";
  o.resolve(l.manifest);
  const auto& g = o.cfg.geom;
  l.source = data::load_split(l.manifest, data::Domain::source, data::Split::train, g);
  l.target = data::load_split(l.manifest, data::Domain::target, data::Split::train, g);
  l.validation = data::load_split(l.manifest, data::Domain::source, data::Split::test, g);
  l.has_validation = l.validation.size() > 0;
  if (l.source.size() > 0) o.cfg.block.in_channels = l.source.samples.front().image.dim(0);
  return l;
}

train::TrainData train_data(const Loaded& l) {
  return train::TrainData::from_manifest(l.manifest, l.source, l.target, l.has_validation ? &l.validation : nullptr);
}

fs::path make_out(const std::string& out) {
  fs::create_directories(out);
  return out;
}

void progress(train::RunLog& log, std::ostream& out) {
  log.on_epoch([&out](const train::EpochRecord& r) {
    out << r.stage << " epoch " << r.epoch + 1;
    for (const auto& [k, v] : r.metrics) out << "  " << k << "=" << fmt("%.4f", v);
    out << "\n";
    out.flush();
  });
}

void write_report(const eval::MetricsReport& rep, const fs::path& dir, const std::string& stem) {
  std::ofstream(dir / (stem + ".txt")) << rep.to_text();
  std::ofstream(dir / (stem + ".tsv")) << rep.to_tsv();
}

/// Evaluates on the target test split when present, writing report files.
void final_report(train::FinalModel& fm, const Loaded& l, const RunOptions& o, const fs::path& dir,
                  std::ostream& out) {
  train::save_network(dir / "final.ckpt", fm.nets, {"final", fm.selected_epoch, 0, fm.val_f1}, o.cfg);
  out << "selected epoch " << fm.selected_epoch + 1 << (fm.fine_tuned ? " (fine-tuned)" : "")
      << ", validation mean F1 " << fmt("%.4f", fm.val_f1) << "\n";
  const auto test = data::load_split(l.manifest, data::Domain::target, data::Split::test, o.cfg.geom);
  if (test.size() == 0) return;
  const auto rep =
      eval::report(train::evaluate_au(fm.nets, test, o.cfg.threshold), l.manifest.au_names);
  write_report(rep, dir, "report_target_test");
  out << "target test:\n" << rep.to_text();
}

// Commands -----------------------------------------------------------------------------
//
// Each command registers its options, then `body` runs after a successful parse.

using Body = std::function<int()>;

Body cmd_synth(CLI::App& app, std::ostream& out) {
  auto spec = std::make_shared<data::SynthSpec>();
  auto seed = std::make_shared<std::uint64_t>(1);
  auto dir = std::make_shared<std::string>();
  app.add_option("--seed", *seed)->capture_default_str();
  app.add_option("--out", *dir, "output directory")->required();
  app.add_option("--synth.image_size", spec->image_size)->capture_default_str();
  app.add_option("--synth.channels", spec->channels)->capture_default_str();
  app.add_option("--synth.n_au", spec->n_au)->capture_default_str();
  app.add_option("--synth.source_train", spec->source_train)->capture_default_str();
  app.add_option("--synth.target_train", spec->target_train)->capture_default_str();
  app.add_option("--synth.source_test", spec->source_test)->capture_default_str();
  app.add_option("--synth.target_test", spec->target_test)->capture_default_str();
  app.add_option("--synth.au_prevalence", spec->au_prevalence)->capture_default_str();
  return [=, &app, &out] {
    if (spec->image_size < nets::BlockConfig::kMinResolution) {
      throw Error("synth.image_size " + std::to_string(spec->image_size) + " is below the landmark branch minimum of " +
                  std::to_string(nets::BlockConfig::kMinResolution) + " (five 2x2 poolings)");
    }
    const auto m = data::synth_dataset(*spec, *seed, *dir);
    echo_config(app, *dir);
    out << "wrote " << m.records.size() << " records to " << (fs::path(*dir) / "manifest.jsonl").string() << "\n";
    return 0;
  };
}

Body cmd_pretrain(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto o = std::make_shared<RunOptions>();
  o->bind(app);
  return [o, &app, &out, &err] {
    auto l = load_data(*o, err);
    const auto dir = make_out(o->out);
    echo_config(app, dir);
    train::RunLog log(dir / "log.jsonl");
    progress(log, out);
    auto res = train::pretrain_landmark_branch(o->cfg, l.source, l.has_validation ? &l.validation : nullptr, log, dir);
    if (!res.best_epoch) {
      diff::save_checkpoint(dir / "pretrain_best.ckpt",
                            train::make_branch_checkpoint(res.branch, {"pretrain", 0, 0, res.best_error}));
    }
    out << "best landmark error " << fmt("%.5f", res.best_error) << " inter-ocular distances\n";
    return 0;
  };
}

Body cmd_train(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto o = std::make_shared<RunOptions>();
  o->bind(app);
  app.add_option("--pretrained", o->pretrained, "landmark branch checkpoint; stage 1 runs when omitted");
  return [o, &app, &out, &err] {
    auto l = load_data(*o, err);
    const auto dir = make_out(o->out);
    echo_config(app, dir);
    train::RunLog log(dir / "log.jsonl");
    progress(log, out);
    std::optional<nets::LandmarkBranch> branch;
    if (o->cfg.enable_ml) {
      if (!o->pretrained.empty()) {
        branch = train::restore_branch(fs::path(o->pretrained));
      } else {
        branch = train::pretrain_landmark_branch(o->cfg, l.source, l.has_validation ? &l.validation : nullptr, log, dir)
                     .branch;
      }
    }
    const auto data = train_data(l);
    auto res = train::train_main(o->cfg, data, branch ? &*branch : nullptr, log, dir);
    if (res.checkpoints.empty()) {
      train::save_network(dir / "final.ckpt", res.nets, {"main", o->cfg.main_epochs, log.last_step(), std::nullopt},
                          o->cfg);
      out << "no validation split: kept the last epoch\n";
      return 0;
    }
    auto fm = train::select_and_finetune(o->cfg, res.checkpoints, data, log, dir);
    final_report(fm, l, *o, dir, out);
    return 0;
  };
}

Body cmd_finetune(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto o = std::make_shared<RunOptions>();
  o->bind(app);
  app.add_option("--checkpoint", o->checkpoint, "network checkpoint to fine-tune")->required();
  return [o, &app, &out, &err] {
    if (!fs::exists(o->checkpoint)) throw Error("checkpoint " + o->checkpoint + " does not exist");
    auto l = load_data(*o, err);
    if (!l.has_validation) throw Error("fine-tuning needs a labelled source test split for validation");
    const auto dir = make_out(o->out);
    echo_config(app, dir);
    train::RunLog log(dir / "log.jsonl");
    progress(log, out);
    auto restored = train::restore_network(fs::path(o->checkpoint));
    const double f1 = eval::report(train::evaluate_au(restored.nets, l.validation, o->cfg.threshold)).mean_f1;
    std::vector<train::EpochCheckpoint> cks;
    cks.push_back({restored.state.stage, restored.state.epoch, f1,
                   train::make_checkpoint(restored.nets, restored.state, restored.config), o->checkpoint});
    auto fm = train::select_and_finetune(o->cfg, cks, train_data(l), log, dir);
    final_report(fm, l, *o, dir, out);
    return 0;
  };
}

Body cmd_eval(CLI::App& app, std::ostream& out, std::ostream& err) {
  struct EvalOptions {
    std::string checkpoint, manifest, out, domain = "target", split = "test";
    double threshold = eval::kDefaultThreshold;
  };
  auto o = std::make_shared<EvalOptions>();
  app.add_option("--checkpoint", o->checkpoint, "network checkpoint")->required();
  app.add_option("--manifest", o->manifest, "dataset manifest (JSONL)")->required();
  app.add_option("--out", o->out, "directory for report.txt / report.tsv");
  app.add_option("--domain", o->domain)->check(CLI::IsMember({"source", "target"}))->capture_default_str();
  app.add_option("--split", o->split)->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  app.add_option("--threshold", o->threshold)->capture_default_str();
  return [o, &out, &err] {
    if (!fs::exists(o->checkpoint)) throw Error("checkpoint " + o->checkpoint + " does not exist");
    const auto restored = train::restore_network(fs::path(o->checkpoint));
    const auto m = data::load_manifest(o->manifest);
    for (const auto& w : m.warnings) err << "warning: " << w << "\n";
    const auto ds =
        data::load_split(m, data::parse_domain(o->domain), data::parse_split(o->split), restored.config.geom);
    if (ds.size() == 0) throw Error("no " + o->domain + "/" + o->split + " records in " + o->manifest);
    const auto rep = eval::report(train::evaluate_au(restored.nets, ds, o->threshold), m.au_names);
    out << rep.to_text();
    if (!o->out.empty()) write_report(rep, make_out(o->out), "report");
    return 0;
  };
}

Body cmd_gradcheck(CLI::App& app, std::ostream& out) {
  auto opts = std::make_shared<diff::GradCheckOptions>();
  app.add_option("--tol", opts->tol, "maximum relative error")->capture_default_str();
  app.add_option("--eps", opts->eps, "finite-difference step")->capture_default_str();
  return [opts, &out] {
    const auto entries = run_grad_suite(*opts);
    bool ok = true;
    for (const auto& e : entries) {
      std::string name = e.name;
      name.resize(std::max<std::size_t>(name.size(), 34), ' ');
      out << name << fmt("%10.3e", e.max_rel_error) << "  " << fmt("%6.0f", static_cast<double>(e.checked)) << "  "
          << (e.passed ? "PASS" : "FAIL") << "\n";
      ok = ok && e.passed;
    }
    out << (ok ? "all gradient checks passed" : "gradient check FAILED") << " (tol " << fmt("%g", opts->tol) << ")\n";
    return ok ? 0 : 1;
  };
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    (args.empty() ? err : out) << kUsage;
    return args.empty() ? 2 : 0;
  }
  const std::string& command = args[0];
  CLI::App app{"aurecon " + command, "aurecon " + command};
  prepare(app);
  Body body;
  if (command == "synth") {
    body = cmd_synth(app, out);
  } else if (command == "pretrain") {
    body = cmd_pretrain(app, out, err);
  } else if (command == "train") {
    body = cmd_train(app, out, err);
  } else if (command == "finetune") {
    body = cmd_finetune(app, out, err);
  } else if (command == "eval") {
    body = cmd_eval(app, out, err);
  } else if (command == "gradcheck") {
    body = cmd_gradcheck(app, out);
  } else {
    err << "unknown command '" << command << "'\n" << kUsage;
    return 2;
  }
  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace aurecon::cli
