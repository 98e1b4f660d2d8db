#include "aurecon/datapipe/batches.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "aurecon/common/error.hpp"
#include "aurecon/datapipe/image_io.hpp"

namespace aurecon::data {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  auto step = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::uint64_t h = step(a);
  h = step(h ^ b);
  h = step(h ^ c);
  return step(h ^ d);
}

Dataset load_split(const Manifest& m, Domain domain, Split split, const Geometry& geom) {
  geom.validate();
  Dataset ds;
  ds.schema = m.schema;
  ds.geom = geom;
  ds.n_au = m.n_au;
  for (const Record* r : m.select(domain, split)) {
    auto s = align_face(read_image(m.resolve(*r)), r->landmarks, m.schema, geom.aligned);
    s.au = r->au;
    s.domain = r->domain;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::vector<double> select_landmarks(const std::vector<double>& coords, const LandmarkSchema& schema) {
  std::vector<double> out;
  out.reserve(2 * schema.train_landmarks.size());
  for (std::size_t i : schema.train_landmarks) {
    out.push_back(coords.at(2 * i));
    out.push_back(coords.at(2 * i + 1));
  }
  return out;
}

Batch collate(const std::vector<Sample>& crops, const LandmarkSchema& schema) {
  if (crops.empty()) throw Error("collate: empty batch");
  const auto& shape = crops.front().image.shape();
  const std::size_t n = crops.size(), per = crops.front().image.numel(), m = 2 * schema.train_landmarks.size();
  std::vector<double> images, coords;
  images.reserve(n * per);
  coords.reserve(n * m);
  Batch b;
  const bool labelled = std::all_of(crops.begin(), crops.end(), [](const Sample& s) { return s.au.has_value(); });
  std::vector<double> au;
  for (const auto& s : crops) {
    if (s.image.shape() != shape) throw ShapeError("collate: samples have different image shapes");
    images.insert(images.end(), s.image.data().begin(), s.image.data().end());
    const auto sel = select_landmarks(s.landmarks, schema);
    coords.insert(coords.end(), sel.begin(), sel.end());
    b.iod.push_back(s.iod);
    if (labelled) au.insert(au.end(), s.au->begin(), s.au->end());
  }
  b.images = diff::Tensor::from({n, shape[0], shape[1], shape[2]}, std::move(images));
  b.landmarks = diff::Tensor::from({n, m}, std::move(coords));
  if (labelled) {
    const std::size_t k = au.size() / n;
    b.au = diff::Tensor::from({n, k}, std::move(au));
  }
  return b;
}

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices, bool augment, std::uint64_t seed) {
  std::vector<Sample> crops;
  crops.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& s = ds.samples.at(indices[k]);
    crops.push_back(augment ? data::augment(s, ds.geom, ds.schema, mix_seed(seed, k, indices[k]))
                            : center_crop(s, ds.geom, ds.schema));
  }
  return collate(crops, ds.schema);
}

BatchPlan::BatchPlan(std::size_t n_source, std::size_t n_target, std::size_t batch_size, std::uint64_t seed)
    : n_source_(n_source), n_target_(n_target), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) throw Error("batch size must be >= 1");
  if (n_source < batch_size) {
    throw Error("source set (" + std::to_string(n_source) + ") is smaller than one batch (" +
                std::to_string(batch_size) + ")");
  }
}

std::vector<PairedIndices> BatchPlan::epoch(std::size_t e) const {
  auto shuffled = [](std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
  };
  const auto src = shuffled(n_source_, mix_seed(seed_, e, 1));
  std::vector<std::size_t> tgt;
  std::size_t wrap = 0;
  std::vector<PairedIndices> out(batches_per_epoch());
  std::size_t tpos = 0;
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b].source.assign(src.begin() + static_cast<long>(b * batch_size_),
                         src.begin() + static_cast<long>((b + 1) * batch_size_));
    if (n_target_ == 0) continue;
    for (std::size_t k = 0; k < batch_size_; ++k) {
      if (tpos == tgt.size()) {
        tgt = shuffled(n_target_, mix_seed(seed_, e, 2, wrap++));
        tpos = 0;
      }
      out[b].target.push_back(tgt[tpos++]);
    }
  }
  return out;
}

PairedBatches::PairedBatches(const Dataset& source, const Dataset& target, std::size_t batch_size,
                             std::uint64_t seed, std::size_t epoch, bool augment)
    : source_(source),
      target_(target),
      order_(BatchPlan(source.size(), target.size(), batch_size, seed).epoch(epoch)),
      seed_(seed),
      epoch_(epoch),
      augment_(augment) {}

bool PairedBatches::next(PairedBatch& out) {
  if (pos_ == order_.size()) return false;
  const auto& idx = order_[pos_];
  out.source = make_batch(source_, idx.source, augment_, mix_seed(seed_, epoch_, pos_, 1));
  out.target = idx.target.empty() ? Batch{} : make_batch(target_, idx.target, augment_, mix_seed(seed_, epoch_, pos_, 2));
  ++pos_;
  return true;
}

}  // namespace aurecon::data
