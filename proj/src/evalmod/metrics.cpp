#include "aurecon/evalmod/metrics.hpp"

#include <cstdio>

#include "aurecon/common/error.hpp"

namespace aurecon::eval {

void ConfusionCounts::update(std::span<const double> probs, std::span<const int> labels, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("threshold must lie in (0, 1)");
  if (probs.size() != per_au_.size() || labels.size() != per_au_.size()) {
    throw ShapeError("update: expected " + std::to_string(per_au_.size()) + " AUs, got " +
                     std::to_string(probs.size()) + " probabilities and " + std::to_string(labels.size()) + " labels");
  }
  for (std::size_t k = 0; k < per_au_.size(); ++k) {
    const bool pred = probs[k] >= threshold;
    const bool truth = labels[k] != 0;
    auto& c = per_au_[k];
    if (pred && truth) {
      ++c.tp;
    } else if (pred) {
      ++c.fp;
    } else if (truth) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  ++samples_;
}

void ConfusionCounts::update(const diff::Tensor& probs, const diff::Tensor& labels, double threshold) {
  if (probs.shape() != labels.shape() || probs.rank() != 2) {
    throw ShapeError("update: probabilities " + diff::shape_str(probs.shape()) + " vs labels " +
                     diff::shape_str(labels.shape()));
  }
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  std::vector<int> row(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) row[j] = labels.at(i * k + j) != 0.0 ? 1 : 0;
    update(probs.data().subspan(i * k, k), row, threshold);
  }
}

void ConfusionCounts::merge(const ConfusionCounts& other) {
  if (other.per_au_.size() != per_au_.size()) throw ShapeError("merge: AU counts differ");
  for (std::size_t k = 0; k < per_au_.size(); ++k) {
    per_au_[k].tp += other.per_au_[k].tp;
    per_au_[k].fp += other.per_au_[k].fp;
    per_au_[k].tn += other.per_au_[k].tn;
    per_au_[k].fn += other.per_au_[k].fn;
  }
  samples_ += other.samples_;
}

double f1(const AuCounts& c) {
  const auto denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

double accuracy(const AuCounts& c) {
  if (c.total() == 0) throw Error("accuracy: no samples counted");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

MetricsReport report(const ConfusionCounts& counts, std::vector<std::string> names) {
  MetricsReport r;
  const std::size_t n = counts.n_au();
  if (names.empty()) {
    for (std::size_t k = 0; k < n; ++k) names.push_back("AU" + std::to_string(k + 1));
  }
  if (names.size() != n) throw ShapeError("report: " + std::to_string(names.size()) + " names for " + std::to_string(n) + " AUs");
  r.au_names = std::move(names);
  r.samples = counts.samples();
  for (std::size_t k = 0; k < n; ++k) {
    r.f1.push_back(f1(counts.at(k)));
    r.accuracy.push_back(counts.samples() == 0 ? 0.0 : accuracy(counts.at(k)));
    r.mean_f1 += r.f1.back();
    r.mean_accuracy += r.accuracy.back();
  }
  if (n > 0) {
    r.mean_f1 /= static_cast<double>(n);
    r.mean_accuracy /= static_cast<double>(n);
  }
  return r;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string MetricsReport::to_text() const {
  std::string out = "samples: " + std::to_string(samples) + "\n";
  out += "AU        F1(%)   Acc(%)\n";
  auto row = [&](const std::string& name, double f, double a) {
    std::string n = name;
    n.resize(std::max<std::size_t>(n.size(), 8), ' ');
    out += n + fmt("%7.1f", 100.0 * f) + "  " + fmt("%7.1f", 100.0 * a) + "\n";
  };
  for (std::size_t k = 0; k < f1.size(); ++k) row(au_names[k], f1[k], accuracy[k]);
  row("Avg.", mean_f1, mean_accuracy);
  return out;
}

std::string MetricsReport::to_tsv() const {
  std::string out = "au\tf1\taccuracy\n";
  for (std::size_t k = 0; k < f1.size(); ++k) {
    out += au_names[k] + "\t" + fmt("%.17g", f1[k]) + "\t" + fmt("%.17g", accuracy[k]) + "\n";
  }
  out += "avg\t" + fmt("%.17g", mean_f1) + "\t" + fmt("%.17g", mean_accuracy) + "\n";
  return out;
}

}  // namespace aurecon::eval
