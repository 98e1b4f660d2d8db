#include "aurecon/datapipe/align.hpp"

#include <cmath>
#include <complex>
#include <random>

#include "aurecon/common/error.hpp"

namespace aurecon::data {

void Geometry::validate() const {
  if (crop == 0 || aligned < crop) {
    throw Error("geometry: crop " + std::to_string(crop) + " must be in [1, aligned=" + std::to_string(aligned) + "]");
  }
}

Similarity Similarity::inverse() const {
  // Inverse of z -> s z + t (complex s = a + ib) is z -> z / s - t / s.
  const std::complex<double> s(a, b), t(tx, ty);
  const auto si = 1.0 / s;
  const auto ti = -t / s;
  return {si.real(), si.imag(), ti.real(), ti.imag()};
}

double Similarity::scale() const { return std::hypot(a, b); }
double Similarity::angle() const { return std::atan2(b, a); }

std::pair<double, double> landmark_mean(const std::vector<double>& coords, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw Error("landmark_mean: empty index list");
  double x = 0.0, y = 0.0;
  for (std::size_t i : idx) {
    if (2 * i + 1 >= coords.size()) throw Error("landmark index " + std::to_string(i) + " out of range");
    x += coords[2 * i];
    y += coords[2 * i + 1];
  }
  const auto n = static_cast<double>(idx.size());
  return {x / n, y / n};
}

Similarity alignment_transform(const std::vector<double>& landmarks_px, const LandmarkSchema& schema,
                               std::size_t aligned) {
  const auto [lx, ly] = landmark_mean(landmarks_px, schema.eye_left);
  const auto [rx, ry] = landmark_mean(landmarks_px, schema.eye_right);
  const std::complex<double> src_l(lx, ly), src_r(rx, ry);
  const auto size = static_cast<double>(aligned);
  const std::complex<double> dst_l(kEyeLeftX * size, kEyeY * size), dst_r(kEyeRightX * size, kEyeY * size);
  const auto span = src_r - src_l;
  if (std::abs(span) < 1e-9) throw Error("align_face: eye centres coincide, alignment is degenerate");
  const auto s = (dst_r - dst_l) / span;
  const auto t = dst_l - s * src_l;
  return {s.real(), s.imag(), t.real(), t.imag()};
}

Tensor warp_image(const Tensor& image, const Similarity& inverse_map, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw ShapeError("warp_image: expected (C, H, W), got " + diff::shape_str(image.shape()));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto src = image.data();
  std::vector<double> out(c * out_h * out_w);
  auto clampi = [](long v, std::size_t n) { return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1)); };
  for (std::size_t i = 0; i < out_h; ++i) {
    for (std::size_t j = 0; j < out_w; ++j) {
      const auto [x, y] = inverse_map.apply(static_cast<double>(j) + 0.5, static_cast<double>(i) + 0.5);
      // Index space: pixel centres at integers.
      const double u = x - 0.5, v = y - 0.5;
      const double fu = std::floor(u), fv = std::floor(v);
      const double du = u - fu, dv = v - fv;
      const std::size_t x0 = clampi(static_cast<long>(fu), w), x1 = clampi(static_cast<long>(fu) + 1, w);
      const std::size_t y0 = clampi(static_cast<long>(fv), h), y1 = clampi(static_cast<long>(fv) + 1, h);
      for (std::size_t k = 0; k < c; ++k) {
        const double* p = src.data() + k * h * w;
        const double top = p[y0 * w + x0] * (1.0 - du) + p[y0 * w + x1] * du;
        const double bot = p[y1 * w + x0] * (1.0 - du) + p[y1 * w + x1] * du;
        out[(k * out_h + i) * out_w + j] = top * (1.0 - dv) + bot * dv;
      }
    }
  }
  return Tensor::from({c, out_h, out_w}, std::move(out));
}

namespace {

double eye_distance(const std::vector<double>& coords, const LandmarkSchema& schema) {
  const auto [lx, ly] = landmark_mean(coords, schema.eye_left);
  const auto [rx, ry] = landmark_mean(coords, schema.eye_right);
  return std::hypot(rx - lx, ry - ly);
}

}  // namespace

std::vector<double> align_landmarks(const std::vector<double>& landmarks_px, const LandmarkSchema& schema) {
  // Normalised output does not depend on the canvas size; 1 keeps it exact.
  const auto t = alignment_transform(landmarks_px, schema, 1);
  std::vector<double> out(landmarks_px.size());
  for (std::size_t i = 0; i + 1 < landmarks_px.size(); i += 2) {
    std::tie(out[i], out[i + 1]) = t.apply(landmarks_px[i], landmarks_px[i + 1]);
  }
  return out;
}

Sample align_face(const Tensor& image, const std::vector<double>& landmarks_px, const LandmarkSchema& schema,
                  std::size_t aligned) {
  if (landmarks_px.size() != 2 * schema.n_land) {
    throw ShapeError("align_face: " + std::to_string(landmarks_px.size()) + " coordinates, schema expects " +
                     std::to_string(2 * schema.n_land));
  }
  const auto t = alignment_transform(landmarks_px, schema, aligned);
  Sample s;
  s.image = warp_image(image, t.inverse(), aligned, aligned);
  const auto size = static_cast<double>(aligned);
  s.landmarks.resize(landmarks_px.size());
  for (std::size_t i = 0; i + 1 < landmarks_px.size(); i += 2) {
    const auto [x, y] = t.apply(landmarks_px[i], landmarks_px[i + 1]);
    s.landmarks[i] = x / size;
    s.landmarks[i + 1] = y / size;
  }
  s.iod = eye_distance(s.landmarks, schema);
  return s;
}

std::vector<double> flip_landmarks(const std::vector<double>& coords, const std::vector<std::size_t>& permutation) {
  if (coords.size() != 2 * permutation.size()) throw ShapeError("flip_landmarks: permutation size mismatch");
  std::vector<double> out(coords.size());
  for (std::size_t i = 0; i < permutation.size(); ++i) {
    const std::size_t from = permutation[i];
    out[2 * i] = 1.0 - coords[2 * from];
    out[2 * i + 1] = coords[2 * from + 1];
  }
  return out;
}

AugmentParams draw_augment(const Geometry& geom, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> off(0, geom.max_offset());
  AugmentParams p;
  p.offset_x = off(rng);
  p.offset_y = off(rng);
  p.flip = std::bernoulli_distribution(0.5)(rng);
  return p;
}

Sample apply_augment(const Sample& aligned, const Geometry& geom, const LandmarkSchema& schema,
                     const AugmentParams& params) {
  geom.validate();
  const auto& img = aligned.image;
  if (img.rank() != 3 || img.dim(1) != geom.aligned || img.dim(2) != geom.aligned) {
    throw ShapeError("augment: expected an aligned " + std::to_string(geom.aligned) + "x" +
                     std::to_string(geom.aligned) + " image, got " + diff::shape_str(img.shape()));
  }
  if (params.offset_x > geom.max_offset() || params.offset_y > geom.max_offset()) {
    throw Error("augment: crop offset outside [0, " + std::to_string(geom.max_offset()) + "]");
  }
  const std::size_t c = img.dim(0), a = geom.aligned, s = geom.crop;
  const auto src = img.data();
  std::vector<double> out(c * s * s);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t j = 0; j < s; ++j) {
        const std::size_t sj = params.flip ? s - 1 - j : j;
        out[(k * s + i) * s + j] = src[(k * a + i + params.offset_y) * a + sj + params.offset_x];
      }
    }
  }
  Sample r;
  r.image = Tensor::from({c, s, s}, std::move(out));
  const auto A = static_cast<double>(a), S = static_cast<double>(s);
  r.landmarks.resize(aligned.landmarks.size());
  for (std::size_t i = 0; i + 1 < r.landmarks.size(); i += 2) {
    r.landmarks[i] = (aligned.landmarks[i] * A - static_cast<double>(params.offset_x)) / S;
    r.landmarks[i + 1] = (aligned.landmarks[i + 1] * A - static_cast<double>(params.offset_y)) / S;
  }
  if (params.flip) r.landmarks = flip_landmarks(r.landmarks, schema.flip_permutation());
  r.au = aligned.au;
  r.domain = aligned.domain;
  r.iod = aligned.iod * A / S;
  return r;
}

Sample augment(const Sample& aligned, const Geometry& geom, const LandmarkSchema& schema, std::uint64_t seed) {
  return apply_augment(aligned, geom, schema, draw_augment(geom, seed));
}

Sample center_crop(const Sample& aligned, const Geometry& geom, const LandmarkSchema& schema) {
  const std::size_t mid = geom.max_offset() / 2;
  return apply_augment(aligned, geom, schema, {mid, mid, false});
}

std::vector<double> to_crop_frame(const std::vector<double>& aligned_coords, const Geometry& geom) {
  const auto A = static_cast<double>(geom.aligned), S = static_cast<double>(geom.crop);
  const auto mid = static_cast<double>(geom.max_offset() / 2);
  std::vector<double> out(aligned_coords.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (aligned_coords[i] * A - mid) / S;
  return out;
}

}  // namespace aurecon::data
