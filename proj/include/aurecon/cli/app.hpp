#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace aurecon::cli {

/// Runs one command line without the program name, e.g.
/// {"train", "--manifest", "m.jsonl", "--out", "run"}. Returns the exit status.
///
/// Commands: synth, pretrain, train, finetune, eval, gradcheck. Options may
/// also come from a key=value file given by --config; flags on the command
/// line override it. Run commands echo the resolved options to
/// <out>/config.ini, which can be fed back through --config.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aurecon::cli
