#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace aurecon::data {

enum class Domain { source, target };
enum class Split { train, test };

std::string to_string(Domain d);
std::string to_string(Split s);
Domain parse_domain(const std::string& s);
Split parse_split(const std::string& s);

/// Landmark convention carried in the manifest header: how many points a
/// record holds, which of them form each eye, which are used as training
/// targets, and which swap under a horizontal flip.
struct LandmarkSchema {
  std::size_t n_land = 68;
  std::vector<std::size_t> eye_left;   // image-left eye
  std::vector<std::size_t> eye_right;  // image-right eye
  std::vector<std::size_t> train_landmarks;
  std::vector<std::pair<std::size_t, std::size_t>> flip_pairs;

  /// 68-point iBUG layout; training set drops the jaw contour (0-16) and the
  /// inner mouth corners (60, 64), leaving 49 points.
  static LandmarkSchema ibug68();

  /// Full permutation of landmark indices under a horizontal flip.
  std::vector<std::size_t> flip_permutation() const;
  void validate() const;
  nlohmann::json to_json() const;
  static LandmarkSchema from_json(const nlohmann::json& j);
};

struct Record {
  std::string path;  // relative to the manifest directory unless absolute
  Domain domain = Domain::source;
  Split split = Split::train;
  std::vector<double> landmarks;  // 2 * n_land interleaved (x, y) pixel coordinates
  std::optional<std::vector<int>> au;
};

/// Computed over source-domain training records only.
struct ManifestStats {
  std::size_t source_train = 0;
  std::vector<double> au_rates;
  /// Mean of the aligned landmarks (all n_land points), in aligned-frame
  /// normalised units. Independent of the aligned size because canonical eye
  /// positions are fixed fractions of it.
  std::vector<double> mean_face;
};

struct Manifest {
  std::filesystem::path base_dir;
  LandmarkSchema schema;
  std::size_t n_au = 0;
  std::vector<std::string> au_names;
  std::vector<Record> records;
  ManifestStats stats;
  std::vector<std::string> warnings;

  std::filesystem::path resolve(const Record& r) const;
  std::vector<const Record*> select(Domain d, Split s) const;
  /// Recomputes `stats` (and appends warnings for AUs with degenerate rates).
  void compute_stats();
};

inline constexpr int kManifestVersion = 1;

/// Line 1 is a header object; every following non-empty line is one record.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
void save_manifest(const Manifest& m, const std::filesystem::path& path);
std::string format_manifest(const Manifest& m);

}  // namespace aurecon::data
