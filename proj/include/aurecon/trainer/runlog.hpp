#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace aurecon::train {

using Values = std::vector<std::pair<std::string, double>>;

struct StepRecord {
  std::string stage;
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  Values values;

  /// Throws if `key` was not recorded.
  double value(std::string_view key) const;
  nlohmann::json to_json() const;
};

struct EpochRecord {
  std::string stage;
  std::size_t epoch = 0;
  Values metrics;
  std::string checkpoint;  // empty when nothing was written

  double metric(std::string_view key) const;
  nlohmann::json to_json() const;
};

/// Step and epoch records of a run, optionally mirrored line by line into a
/// JSONL file. Rejects non-finite values and non-increasing step numbers.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::filesystem::path& path);

  void record_step(StepRecord r);
  void record_epoch(EpochRecord r);
  /// Called after every accepted epoch record (progress reporting).
  void on_epoch(std::function<void(const EpochRecord&)> f) { on_epoch_ = std::move(f); }
  std::uint64_t last_step() const { return last_step_; }

  const std::vector<StepRecord>& steps() const { return steps_; }
  const std::vector<EpochRecord>& epochs() const { return epochs_; }
  /// One value per step record of `stage` (all stages when empty).
  std::vector<double> series(std::string_view key, std::string_view stage = {}) const;

  /// Parses a file written by this class, re-checking its invariants.
  static RunLog read(const std::filesystem::path& path);

 private:
  void write(const nlohmann::json& j);

  std::vector<StepRecord> steps_;
  std::vector<EpochRecord> epochs_;
  std::uint64_t last_step_ = 0;
  std::unique_ptr<std::ofstream> out_;
  std::function<void(const EpochRecord&)> on_epoch_;
};

}  // namespace aurecon::train
