#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "aurecon/datapipe/manifest.hpp"
#include "aurecon/diffcore/tensor.hpp"

namespace aurecon::data {

/// Procedural two-domain face set. Faces are white landmark blobs over a
/// domain-specific background (smooth gradient for source, stripes for
/// target); each AU is a coloured disc anchored to fixed landmarks.
struct SynthSpec {
  std::size_t image_size = 80;
  std::size_t channels = 3;
  std::size_t n_au = 6;
  std::size_t source_train = 200;
  std::size_t target_train = 200;
  std::size_t source_test = 100;
  std::size_t target_test = 100;
  double au_prevalence = 0.35;

  void validate() const;
};

struct Background {
  Domain domain = Domain::source;
  double angle = 0.0;
  double period = 6.0;  // stripe period in pixels (target only)
  double phase = 0.0;
  std::array<double, 3> base = {0.35, 0.35, 0.35};
  double amplitude = 0.15;
};

/// Everything needed to render one face deterministically.
struct SynthFace {
  std::vector<double> landmarks;  // 2 * 68 pixel coordinates
  std::vector<int> au;
  Background background;
  double face_side = 0.0;  // pixel size of the unit face square
  double rotation = 0.0;   // radians
};

enum RenderLayer : unsigned { kBackgroundLayer = 1, kAuLayer = 2, kLandmarkLayer = 4, kAllLayers = 7 };

struct RenderOptions {
  unsigned layers = kAllLayers;
  /// When >= 0, the landmark layer draws only this landmark.
  int only_landmark = -1;
};

/// 68-point template in unit face coordinates, mirror-symmetric under the
/// iBUG flip pairs.
const std::vector<double>& face_template();

/// Truncation radius of a landmark blob and of AU k's disc, in pixels.
double landmark_blob_radius(const SynthFace& face);
double au_region_radius(const SynthFace& face, std::size_t k);
/// Pixel centres of AU k's discs for this face.
std::vector<std::array<double, 2>> au_region_centres(const SynthFace& face, std::size_t k);

SynthFace sample_face(const SynthSpec& spec, Domain domain, std::mt19937_64& rng);
diff::Tensor render_face(const SynthFace& face, const SynthSpec& spec, const RenderOptions& opts = {});

/// Writes images/<domain>_<split>_<n>.ppm (or .pgm) and manifest.jsonl under
/// out_dir. Target training records carry "-" for AU labels; every other
/// record carries its exact labels.
Manifest synth_dataset(const SynthSpec& spec, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace aurecon::data
