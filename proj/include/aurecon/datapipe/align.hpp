#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "aurecon/datapipe/manifest.hpp"
#include "aurecon/diffcore/tensor.hpp"

namespace aurecon::data {

using diff::Tensor;

// Coordinate convention used throughout: continuous pixel coordinates in
// which pixel (row i, column j) covers [j, j + 1) x [i, i + 1), so its centre
// is (j + 0.5, i + 0.5). Normalised coordinates divide by the image size.

/// Aligned canvas size and random-crop size (full scale 200 / 176).
struct Geometry {
  std::size_t aligned = 200;
  std::size_t crop = 176;

  std::size_t max_offset() const { return aligned - crop; }
  void validate() const;
};

/// Canonical eye centres as fractions of the aligned canvas (70 / 130 / 80 at 200 px).
inline constexpr double kEyeLeftX = 0.35;
inline constexpr double kEyeRightX = 0.65;
inline constexpr double kEyeY = 0.40;

/// x' = a x - b y + tx, y' = b x + a y + ty: rotation, uniform scale, translation.
struct Similarity {
  double a = 1.0, b = 0.0, tx = 0.0, ty = 0.0;

  std::pair<double, double> apply(double x, double y) const { return {a * x - b * y + tx, b * x + a * y + ty}; }
  Similarity inverse() const;
  double scale() const;
  double angle() const;
};

/// Mean (x, y) of the listed landmarks in an interleaved coordinate vector.
std::pair<double, double> landmark_mean(const std::vector<double>& coords, const std::vector<std::size_t>& idx);

/// Maps raw pixel coordinates so that the eye centres land on the canonical
/// positions of an `aligned`-pixel canvas. Throws on coincident eye centres.
Similarity alignment_transform(const std::vector<double>& landmarks_px, const LandmarkSchema& schema,
                               std::size_t aligned);

/// Bilinear resampling with edge clamping: output pixel centre p is read from
/// the source at inverse_map(p).
Tensor warp_image(const Tensor& image, const Similarity& inverse_map, std::size_t out_h, std::size_t out_w);

/// Face sample. `landmarks` are normalised to the sample's own image size,
/// all n_land points; `iod` is the eye-centre distance in the same units.
struct Sample {
  Tensor image;
  std::vector<double> landmarks;
  std::optional<std::vector<int>> au;
  Domain domain = Domain::source;
  double iod = 0.0;
};

/// Landmarks only, in aligned normalised units.
std::vector<double> align_landmarks(const std::vector<double>& landmarks_px, const LandmarkSchema& schema);

/// Warps a raw (C, H, W) image to an aligned x aligned canvas.
Sample align_face(const Tensor& image, const std::vector<double>& landmarks_px, const LandmarkSchema& schema,
                  std::size_t aligned);

/// Normalised horizontal mirror: x -> 1 - x and left/right indices swapped.
std::vector<double> flip_landmarks(const std::vector<double>& coords, const std::vector<std::size_t>& permutation);

struct AugmentParams {
  std::size_t offset_x = 0;
  std::size_t offset_y = 0;
  bool flip = false;
};

/// Crop offsets uniform in [0, max_offset]^2, flip with probability 0.5.
AugmentParams draw_augment(const Geometry& geom, std::uint64_t seed);
Sample apply_augment(const Sample& aligned, const Geometry& geom, const LandmarkSchema& schema,
                     const AugmentParams& params);
Sample augment(const Sample& aligned, const Geometry& geom, const LandmarkSchema& schema, std::uint64_t seed);
/// Deterministic evaluation view: centred crop, no flip.
Sample center_crop(const Sample& aligned, const Geometry& geom, const LandmarkSchema& schema);

/// Converts aligned-frame normalised coordinates to the centred-crop frame.
std::vector<double> to_crop_frame(const std::vector<double>& aligned_coords, const Geometry& geom);

}  // namespace aurecon::data
