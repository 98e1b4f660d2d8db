#pragma once

#include <cstdint>
#include <vector>

#include "aurecon/datapipe/align.hpp"
#include "aurecon/datapipe/manifest.hpp"

namespace aurecon::data {

/// Aligned samples of one (domain, split) held in memory.
struct Dataset {
  LandmarkSchema schema;
  Geometry geom;
  std::size_t n_au = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

/// Reads and aligns every record of the given domain and split.
Dataset load_split(const Manifest& m, Domain domain, Split split, const Geometry& geom);

/// A collated batch at crop resolution. `landmarks` holds only the schema's
/// training landmarks; `au` is undefined unless every sample is labelled.
struct Batch {
  diff::Tensor images;     // (N, C, S, S)
  diff::Tensor landmarks;  // (N, 2 * n_train)
  std::vector<double> iod;
  diff::Tensor au;  // (N, n_au)

  std::size_t size() const { return iod.size(); }
};

/// Selects the training landmark subset from a full coordinate vector.
std::vector<double> select_landmarks(const std::vector<double>& coords, const LandmarkSchema& schema);

Batch collate(const std::vector<Sample>& crops, const LandmarkSchema& schema);

/// Builds a batch from dataset indices. With `augment` each sample gets a
/// random crop/flip drawn from (seed, index position); otherwise the centred crop.
Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices, bool augment, std::uint64_t seed);

struct PairedIndices {
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
};

/// Epoch ordering: the source set is shuffled and cut into floor(n_src / bs)
/// batches; target indices follow a shuffled order that cycles (reshuffled
/// on each wrap) so every source batch gets a full target batch. An empty
/// target set yields empty target lists.
class BatchPlan {
 public:
  BatchPlan(std::size_t n_source, std::size_t n_target, std::size_t batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const { return n_source_ / batch_size_; }
  std::size_t batch_size() const { return batch_size_; }
  std::vector<PairedIndices> epoch(std::size_t e) const;

 private:
  std::size_t n_source_, n_target_, batch_size_;
  std::uint64_t seed_;
};

struct PairedBatch {
  Batch source;
  Batch target;
};

/// Iterates one epoch of paired, augmented batches.
class PairedBatches {
 public:
  PairedBatches(const Dataset& source, const Dataset& target, std::size_t batch_size, std::uint64_t seed,
                std::size_t epoch, bool augment = true);

  std::size_t size() const { return order_.size(); }
  bool next(PairedBatch& out);

 private:
  const Dataset& source_;
  const Dataset& target_;
  std::vector<PairedIndices> order_;
  std::uint64_t seed_;
  std::size_t epoch_;
  bool augment_;
  std::size_t pos_ = 0;
};

/// Deterministic 64-bit mixing of several seeds (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0, std::uint64_t d = 0);

}  // namespace aurecon::data
