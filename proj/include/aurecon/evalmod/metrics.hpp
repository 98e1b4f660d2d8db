#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aurecon/diffcore/tensor.hpp"

namespace aurecon::eval {

struct AuCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const AuCounts&) const = default;
};

inline constexpr double kDefaultThreshold = 0.5;

/// Per-AU confusion counts over a stream of samples. A prediction is
/// positive when prob >= threshold.
class ConfusionCounts {
 public:
  explicit ConfusionCounts(std::size_t n_au = 0) : per_au_(n_au) {}

  void update(std::span<const double> probs, std::span<const int> labels, double threshold = kDefaultThreshold);
  /// Batched form: (N, n_au) probabilities and {0, 1} labels.
  void update(const diff::Tensor& probs, const diff::Tensor& labels, double threshold = kDefaultThreshold);
  /// Adds another shard's counts (same n_au).
  void merge(const ConfusionCounts& other);

  std::size_t n_au() const { return per_au_.size(); }
  std::uint64_t samples() const { return samples_; }
  const AuCounts& at(std::size_t k) const { return per_au_.at(k); }
  bool operator==(const ConfusionCounts&) const = default;

 private:
  std::vector<AuCounts> per_au_;
  std::uint64_t samples_ = 0;
};

/// 2tp / (2tp + fp + fn), or 0 when nothing was predicted or present.
double f1(const AuCounts& c);
/// (tp + tn) / total; throws when no samples were counted.
double accuracy(const AuCounts& c);

struct MetricsReport {
  std::vector<std::string> au_names;
  std::vector<double> f1;
  std::vector<double> accuracy;
  double mean_f1 = 0.0;
  double mean_accuracy = 0.0;
  std::uint64_t samples = 0;

  /// Human-readable table with percentages and an "Avg." row.
  std::string to_text() const;
  /// Tab-separated table: au, f1, accuracy (fractions), last row "avg".
  std::string to_tsv() const;
};

/// Names default to AU1..AUn when `names` is empty.
MetricsReport report(const ConfusionCounts& counts, std::vector<std::string> names = {});

}  // namespace aurecon::eval
