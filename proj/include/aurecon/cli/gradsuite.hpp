#pragma once

#include <string>
#include <vector>

#include "aurecon/diffcore/grad_check.hpp"

namespace aurecon::cli {

struct GradSuiteEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Finite-difference checks of every network block and every loss term at
/// small shapes. Each block is probed through a fixed random projection of
/// its output, so every output element contributes to the checked scalar.
std::vector<GradSuiteEntry> run_grad_suite(const diff::GradCheckOptions& opts);

}  // namespace aurecon::cli
