#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "aurecon/common/error.hpp"
#include "aurecon/datapipe/align.hpp"
#include "aurecon/datapipe/batches.hpp"
#include "aurecon/datapipe/image_io.hpp"
#include "aurecon/datapipe/manifest.hpp"
#include "aurecon/datapipe/synth.hpp"
#include "aurecon/diffcore/ops.hpp"
#include "aurecon/diffcore/optimizer.hpp"
#include "aurecon/diffcore/param_store.hpp"

namespace aurecon::data {
namespace {

namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("aurecon_datapipe_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Smooth test pattern on the unit square, three channels.
double pattern(std::size_t c, double x, double y) {
  const double k = 1.0 + 0.3 * static_cast<double>(c);
  return 0.5 + 0.25 * std::sin(2 * kPi * 1.3 * k * x + 0.4) * std::cos(2 * kPi * 0.9 * y + 0.2 * k);
}

// Renders `pattern` at `size` px. `to_unit` maps a pixel-space point to the
// unit-square point whose pattern value it shows.
template <class F>
Tensor render_pattern(std::size_t size, F to_unit) {
  std::vector<double> v(3 * size * size);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < size; ++i) {
      for (std::size_t j = 0; j < size; ++j) {
        const auto [x, y] = to_unit(static_cast<double>(j) + 0.5, static_cast<double>(i) + 0.5);
        v[(c * size + i) * size + j] = pattern(c, x, y);
      }
    }
  }
  return Tensor::from({3, size, size}, std::move(v));
}

// 68 landmarks with both eyes collapsed to the given centres; the rest on a
// fixed scatter so transforms of every point can be checked.
std::vector<double> eye_landmarks(double lx, double ly, double rx, double ry) {
  const auto schema = LandmarkSchema::ibug68();
  std::vector<double> lm(136);
  for (std::size_t i = 0; i < 68; ++i) {
    lm[2 * i] = 60.0 + static_cast<double>((i * 37) % 80);
    lm[2 * i + 1] = 60.0 + static_cast<double>((i * 53) % 80);
  }
  for (std::size_t i : schema.eye_left) {
    lm[2 * i] = lx;
    lm[2 * i + 1] = ly;
  }
  for (std::size_t i : schema.eye_right) {
    lm[2 * i] = rx;
    lm[2 * i + 1] = ry;
  }
  return lm;
}

// Max abs difference over aligned pixels whose source point lies at least
// `margin` px inside every source image (so edge clamping is not compared).
double interior_max_diff(const Tensor& a, const Tensor& b, const std::vector<std::pair<Similarity, double>>& sources,
                         double margin) {
  const std::size_t n = a.dim(1);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      bool inside = true;
      for (const auto& [inv, size] : sources) {
        const auto [x, y] = inv.apply(static_cast<double>(j) + 0.5, static_cast<double>(i) + 0.5);
        inside &= x > margin && y > margin && x < size - margin && y < size - margin;
      }
      if (!inside) continue;
      for (std::size_t c = 0; c < a.dim(0); ++c) {
        worst = std::max(worst, std::fabs(a.at((c * n + i) * n + j) - b.at((c * n + i) * n + j)));
      }
    }
  }
  return worst;
}

std::pair<double, double> centroid(const Tensor& img, std::size_t channel = 0) {
  const std::size_t h = img.dim(1), w = img.dim(2);
  double sx = 0, sy = 0, sw = 0;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double v = img.at((channel * h + i) * w + j);
      sx += v * (static_cast<double>(j) + 0.5);
      sy += v * (static_cast<double>(i) + 0.5);
      sw += v;
    }
  }
  return {sx / sw, sy / sw};
}

// ---------------------------------------------------------------- image IO

TEST(ImageIo, RoundTripRgbAndGray) {
  TempDir dir;
  for (std::size_t c : {1u, 3u}) {
    std::vector<double> v(c * 5 * 7);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 29) % 256) / 255.0;
    auto img = Tensor::from({c, 5, 7}, v);
    const auto p = dir.path() / (c == 1 ? "g.pgm" : "c.ppm");
    write_image(p, img);
    auto back = read_image(p);
    ASSERT_EQ(back.shape(), img.shape());
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back.at(i), v[i], 1e-12);
  }
}

TEST(ImageIo, HeaderCommentsAndErrors) {
  TempDir dir;
  {
    std::ofstream f(dir.path() / "c.pgm", std::ios::binary);
    f << "P5\n# comment\n2 1\n# another\n100\n";
    f.put(static_cast<char>(50));
    f.put(static_cast<char>(100));
  }
  auto img = read_image(dir.path() / "c.pgm");
  EXPECT_EQ(img.shape(), (diff::Shape{1, 1, 2}));
  EXPECT_NEAR(img.at(0), 0.5, 1e-12);
  EXPECT_NEAR(img.at(1), 1.0, 1e-12);

  {
    std::ofstream f(dir.path() / "bad.ppm", std::ios::binary);
    f << "P3\n1 1\n255\n0 0 0\n";
  }
  EXPECT_THROW(read_image(dir.path() / "bad.ppm"), FormatError);
  {
    std::ofstream f(dir.path() / "short.ppm", std::ios::binary);
    f << "P6\n4 4\n255\nabc";
  }
  EXPECT_THROW(read_image(dir.path() / "short.ppm"), FormatError);
  EXPECT_THROW(read_image(dir.path() / "missing.ppm"), Error);
  EXPECT_THROW(write_image(dir.path() / "x.ppm", Tensor::zeros({2, 3, 3})), ShapeError);
}

// ---------------------------------------------------------------- schema / manifest

TEST(Schema, Ibug68Layout) {
  const auto s = LandmarkSchema::ibug68();
  EXPECT_EQ(s.train_landmarks.size(), 49u);
  const std::set<std::size_t> train(s.train_landmarks.begin(), s.train_landmarks.end());
  for (std::size_t i = 0; i <= 16; ++i) EXPECT_FALSE(train.count(i));
  EXPECT_FALSE(train.count(60));
  EXPECT_FALSE(train.count(64));
  const auto perm = s.flip_permutation();
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(perm[perm[i]], i);
  EXPECT_NO_THROW(s.validate());
}

TEST(Schema, FaceTemplateIsMirrorSymmetric) {
  const auto perm = LandmarkSchema::ibug68().flip_permutation();
  const auto& t = face_template();
  const auto flipped = flip_landmarks(t, perm);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(flipped[i], t[i], 1e-12) << "coordinate " << i;
}

std::string header_line(std::size_t n_au = 2) {
  return nlohmann::json({{"format", "aurecon.manifest"},
                         {"version", 1},
                         {"schema", LandmarkSchema::ibug68().to_json()},
                         {"n_au", n_au}})
      .dump();
}

std::string record_line(const std::string& path, const std::string& domain, const nlohmann::json& au,
                        std::size_t n_coords = 136) {
  std::vector<double> lm(n_coords);
  for (std::size_t i = 0; i < n_coords; ++i) lm[i] = 50.0 + static_cast<double>(i % 17);
  // distinct eye centres
  lm[2 * 36] = 30;
  lm[2 * 45] = 70;
  return nlohmann::json({{"path", path}, {"domain", domain}, {"landmarks", lm}, {"au", au}}).dump();
}

TEST(Manifest, RatesFromSourceTrainingOnly) {
  std::string text = header_line(1) + "\n";
  for (int i = 0; i < 10; ++i) text += record_line("s" + std::to_string(i), "source", {i < 3 ? 1 : 0}) + "\n";
  text += record_line("t0", "target", "-") + "\n";
  text += record_line("t1", "target", {1}) + "\n";
  auto m = parse_manifest(text, "/data");
  ASSERT_EQ(m.records.size(), 12u);
  EXPECT_EQ(m.stats.source_train, 10u);
  EXPECT_NEAR(m.stats.au_rates[0], 0.3, 1e-15);
  EXPECT_FALSE(m.records[10].au.has_value());
  EXPECT_EQ(m.resolve(m.records[0]), fs::path("/data/s0"));
  EXPECT_EQ(m.stats.mean_face.size(), 136u);
  EXPECT_TRUE(m.warnings.empty());
}

TEST(Manifest, DuplicatePathWarnsAndKeepsBoth) {
  std::string text = header_line(1) + "\n" + record_line("a", "source", {1}) + "\n" +
                     record_line("a", "source", {0}) + "\n";
  auto m = parse_manifest(text, ".");
  EXPECT_EQ(m.records.size(), 2u);
  ASSERT_EQ(m.warnings.size(), 1u);
  EXPECT_NE(m.warnings[0].find("duplicate"), std::string::npos);
  EXPECT_NE(m.warnings[0].find("line 3"), std::string::npos);
}

TEST(Manifest, ErrorsCarryLineNumbers) {
  auto expect_line = [](const std::string& text, const std::string& needle) {
    try {
      parse_manifest(text, ".");
      ADD_FAILURE() << "expected FormatError for " << needle;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  const auto h = header_line(2) + "\n";
  expect_line(h + record_line("a", "source", {1, 0}) + "\n{not json\n", "line 3");
  expect_line(h + record_line("a", "source", {1, 0}, 98) + "\n", "line 2");
  expect_line(h + record_line("a", "source", {1, 0}, 98) + "\n", "n_land 68");
  expect_line(h + record_line("a", "source", "-") + "\n", "must carry AU labels");
  expect_line(h + record_line("a", "source", {1}) + "\n", "expected 2 AU labels");
  expect_line(h + record_line("a", "elsewhere", {1, 0}) + "\n", "unknown domain");
  expect_line(h + record_line("a", "source", {2, 0}) + "\n", "0 or 1");
  expect_line("", "empty");
  expect_line("{\"format\":\"other\"}\n", "line 1");
}

TEST(Manifest, SaveLoadRoundTrip) {
  TempDir dir;
  std::string text = header_line(2) + "\n" + record_line("a.ppm", "source", {1, 0}) + "\n" +
                     record_line("b.ppm", "target", "-") + "\n";
  auto m = parse_manifest(text, dir.path());
  m.au_names = {"AU1", "AU2"};
  save_manifest(m, dir.path() / "m.jsonl");
  auto back = load_manifest(dir.path() / "m.jsonl");
  EXPECT_EQ(format_manifest(back), format_manifest(m));
  EXPECT_EQ(back.base_dir, dir.path());
  EXPECT_EQ(back.au_names, m.au_names);
}

// ---------------------------------------------------------------- alignment

TEST(Align, CanonicalInputIsFixedPoint) {
  const auto schema = LandmarkSchema::ibug68();
  auto lm = eye_landmarks(70, 80, 130, 80);
  auto img = render_pattern(200, [](double x, double y) { return std::pair{x / 200, y / 200}; });
  auto s = align_face(img, lm, schema, 200);
  for (std::size_t i = 0; i < lm.size(); ++i) EXPECT_NEAR(s.landmarks[i] * 200.0, lm[i], 1e-9);
  for (std::size_t i = 0; i < img.numel(); ++i) ASSERT_NEAR(s.image.at(i), img.at(i), 1e-9);
  EXPECT_NEAR(s.iod, 0.3, 1e-12);
}

TEST(Align, RotationIsUndone) {
  const auto schema = LandmarkSchema::ibug68();
  const double th = 30.0 * kPi / 180.0, c = std::cos(th), s = std::sin(th);
  auto rot = [&](double x, double y) {  // rotate about the image centre
    return std::pair{100 + c * (x - 100) - s * (y - 100), 100 + s * (x - 100) + c * (y - 100)};
  };
  auto unrot = [&](double x, double y) {
    return std::pair{100 + c * (x - 100) + s * (y - 100), 100 - s * (x - 100) + c * (y - 100)};
  };
  const auto [lx, ly] = rot(75, 85);
  const auto [rx, ry] = rot(125, 85);
  auto rotated = render_pattern(200, [&](double x, double y) {
    const auto [ux, uy] = unrot(x, y);
    return std::pair{ux / 200, uy / 200};
  });
  auto upright = render_pattern(200, [](double x, double y) { return std::pair{x / 200, y / 200}; });

  auto a = align_face(rotated, eye_landmarks(lx, ly, rx, ry), schema, 200);
  auto b = align_face(upright, eye_landmarks(75, 85, 125, 85), schema, 200);
  const auto [alx, aly] = landmark_mean(a.landmarks, schema.eye_left);
  const auto [arx, ary] = landmark_mean(a.landmarks, schema.eye_right);
  EXPECT_LT(std::fabs(std::atan2(ary - aly, arx - alx)), 1e-6);

  const auto ta = alignment_transform(eye_landmarks(lx, ly, rx, ry), schema, 200).inverse();
  const auto tb = alignment_transform(eye_landmarks(75, 85, 125, 85), schema, 200).inverse();
  EXPECT_LT(interior_max_diff(a.image, b.image, {{ta, 200.0}, {tb, 200.0}}, 1.0), 1e-3);
}

TEST(Align, ScaleInvariance) {
  const auto schema = LandmarkSchema::ibug68();
  auto small = render_pattern(200, [](double x, double y) { return std::pair{x / 200, y / 200}; });
  auto large = render_pattern(400, [](double x, double y) { return std::pair{x / 400, y / 400}; });
  const auto lm_small = eye_landmarks(78, 88, 128, 92);
  auto lm_large = lm_small;
  for (double& v : lm_large) v *= 2.0;
  auto a = align_face(small, lm_small, schema, 200);
  auto b = align_face(large, lm_large, schema, 200);
  for (std::size_t i = 0; i < a.landmarks.size(); ++i) EXPECT_NEAR(a.landmarks[i], b.landmarks[i], 1e-12);
  const auto ta = alignment_transform(lm_small, schema, 200).inverse();
  const auto tb = alignment_transform(lm_large, schema, 200).inverse();
  EXPECT_LT(interior_max_diff(a.image, b.image, {{ta, 200.0}, {tb, 400.0}}, 1.0), 1e-3);
}

TEST(Align, IdempotentAndDegenerate) {
  const auto schema = LandmarkSchema::ibug68();
  auto img = render_pattern(240, [](double x, double y) { return std::pair{x / 240, y / 240}; });
  auto once = align_face(img, eye_landmarks(90, 100, 150, 110), schema, 200);
  auto px = once.landmarks;
  for (double& v : px) v *= 200.0;
  auto twice = align_face(once.image, px, schema, 200);
  for (std::size_t i = 0; i < once.image.numel(); ++i) ASSERT_NEAR(twice.image.at(i), once.image.at(i), 1e-9);
  for (std::size_t i = 0; i < px.size(); ++i) EXPECT_NEAR(twice.landmarks[i], once.landmarks[i], 1e-12);

  EXPECT_THROW(align_face(img, eye_landmarks(90, 100, 90, 100), schema, 200), Error);
  EXPECT_THROW(align_face(img, std::vector<double>(98, 1.0), schema, 200), ShapeError);
}

TEST(Align, SimilarityInverse) {
  Similarity t{1.2, -0.4, 3.0, -7.0};
  const auto inv = t.inverse();
  const auto [x, y] = t.apply(13.0, -2.5);
  const auto [bx, by] = inv.apply(x, y);
  EXPECT_NEAR(bx, 13.0, 1e-12);
  EXPECT_NEAR(by, -2.5, 1e-12);
}

// ---------------------------------------------------------------- augmentation

Sample blob_sample(const Geometry& g, double bx, double by, std::size_t landmark) {
  const std::size_t a = g.aligned;
  std::vector<double> v(a * a);
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < a; ++j) {
      const double dx = static_cast<double>(j) + 0.5 - bx, dy = static_cast<double>(i) + 0.5 - by;
      v[i * a + j] = std::exp(-(dx * dx + dy * dy) / (2 * 2.0 * 2.0));
    }
  }
  Sample s;
  s.image = Tensor::from({1, a, a}, std::move(v));
  s.landmarks.assign(136, 0.5);
  s.landmarks[2 * landmark] = bx / static_cast<double>(a);
  s.landmarks[2 * landmark + 1] = by / static_cast<double>(a);
  s.iod = 0.3;
  return s;
}

TEST(Augment, DeterministicAndInRange) {
  const Geometry g{200, 176};
  const auto schema = LandmarkSchema::ibug68();
  auto s = blob_sample(g, 100, 90, 30);
  auto a = augment(s, g, schema, 42), b = augment(s, g, schema, 42);
  EXPECT_EQ(a.landmarks, b.landmarks);
  for (std::size_t i = 0; i < a.image.numel(); ++i) ASSERT_EQ(a.image.at(i), b.image.at(i));
  EXPECT_EQ(a.image.shape(), (diff::Shape{1, 176, 176}));

  int flips = 0;
  std::size_t max_off = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const auto p = draw_augment(g, seed);
    EXPECT_LE(p.offset_x, 24u);
    EXPECT_LE(p.offset_y, 24u);
    max_off = std::max({max_off, p.offset_x, p.offset_y});
    flips += p.flip;
  }
  EXPECT_EQ(max_off, 24u);
  EXPECT_GT(flips, 150);
  EXPECT_LT(flips, 250);
}

TEST(Augment, ZeroOffsetShiftsByNormalisationOnly) {
  const Geometry g{200, 176};
  auto s = blob_sample(g, 100, 90, 30);
  auto r = apply_augment(s, g, LandmarkSchema::ibug68(), {0, 0, false});
  for (std::size_t i = 0; i < s.landmarks.size(); ++i) EXPECT_NEAR(r.landmarks[i], s.landmarks[i] * 200.0 / 176.0, 1e-12);
  EXPECT_NEAR(r.iod, 0.3 * 200.0 / 176.0, 1e-12);
}

TEST(Augment, FlipTwiceIsIdentity) {
  const auto perm = LandmarkSchema::ibug68().flip_permutation();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> lm(136);
  for (double& v : lm) v = u(rng);
  const auto back = flip_landmarks(flip_landmarks(lm, perm), perm);
  for (std::size_t i = 0; i < lm.size(); ++i) EXPECT_NEAR(back[i], lm[i], 1e-12);
}

TEST(Augment, ProbeBlobFollowsItsLandmark) {
  const Geometry g{200, 176};
  const auto schema = LandmarkSchema::ibug68();
  const auto perm = schema.flip_permutation();
  const std::size_t k = 37;  // swaps with 44 under flip
  auto s = blob_sample(g, 84.3, 101.7, k);
  for (const AugmentParams p : {AugmentParams{3, 17, false}, AugmentParams{24, 0, true}, AugmentParams{11, 9, true}}) {
    auto r = apply_augment(s, g, schema, p);
    const std::size_t idx = p.flip ? perm[k] : k;
    const auto [cx, cy] = centroid(r.image);
    EXPECT_NEAR(cx / 176.0, r.landmarks[2 * idx], 0.05 / 176.0);
    EXPECT_NEAR(cy / 176.0, r.landmarks[2 * idx + 1], 0.05 / 176.0);
  }
}

// ---------------------------------------------------------------- synthetic data

TEST(Synth, AuToggleChangesOnlyItsRegion) {
  SynthSpec spec;
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    auto face = sample_face(spec, trial % 2 ? Domain::target : Domain::source, rng);
    for (std::size_t k = 0; k < spec.n_au; ++k) {
      auto on = face, off = face;
      on.au[k] = 1;
      off.au[k] = 0;
      auto a = render_face(on, spec), b = render_face(off, spec);
      const auto centres = au_region_centres(face, k);
      const double r = au_region_radius(face, k);
      std::size_t changed = 0;
      const std::size_t n = spec.image_size;
      for (std::size_t c = 0; c < spec.channels; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double diff = std::fabs(a.at((c * n + i) * n + j) - b.at((c * n + i) * n + j));
            if (diff == 0.0) continue;
            ++changed;
            double dmin = 1e9;
            for (const auto& ctr : centres) {
              dmin = std::min(dmin, std::hypot(static_cast<double>(j) + 0.5 - ctr[0], static_cast<double>(i) + 0.5 - ctr[1]));
            }
            EXPECT_LT(dmin, r) << "AU " << k << " changed pixel outside its region";
          }
        }
      }
      EXPECT_GT(changed, 0u) << "AU " << k;
    }
  }
}

TEST(Synth, LandmarkBlobCentroidsMatchCoordinates) {
  SynthSpec spec;
  std::mt19937_64 rng(10);
  auto face = sample_face(spec, Domain::source, rng);
  for (std::size_t k = 0; k < 68; ++k) {
    auto img = render_face(face, spec, {kLandmarkLayer, static_cast<int>(k)});
    const auto [cx, cy] = centroid(img);
    EXPECT_LT(std::hypot(cx - face.landmarks[2 * k], cy - face.landmarks[2 * k + 1]), 1.0) << "landmark " << k;
  }
}

TEST(Synth, BackgroundDomainsAreSeparable) {
  SynthSpec spec;
  std::mt19937_64 rng(11);
  // Features: mean absolute horizontal and vertical pixel differences.
  auto features = [&](Domain d) {
    auto img = render_face(sample_face(spec, d, rng), spec, {kBackgroundLayer});
    const std::size_t n = spec.image_size;
    double gx = 0, gy = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = 0; j + 1 < n; ++j) {
        gx += std::fabs(img.at(i * n + j + 1) - img.at(i * n + j));
        gy += std::fabs(img.at((i + 1) * n + j) - img.at(i * n + j));
      }
    }
    const double norm = static_cast<double>((n - 1) * (n - 1));
    return std::array<double, 2>{10.0 * gx / norm, 10.0 * gy / norm};
  };
  auto make = [&](std::size_t per_domain) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < per_domain; ++i) {
      for (Domain d : {Domain::source, Domain::target}) {
        const auto f = features(d);
        x.insert(x.end(), f.begin(), f.end());
        y.push_back(d == Domain::source ? 1.0 : 0.0);
      }
    }
    return std::pair{Tensor::from({y.size(), 2}, x), Tensor::from({y.size(), 1}, y)};
  };
  const auto [xtr, ytr] = make(60);
  const auto [xte, yte] = make(60);

  diff::ParamStore ps;
  auto w = ps.add("w", Tensor::zeros({1, 2}));
  auto b = ps.add("b", Tensor::zeros({1}));
  for (int step = 0; step < 300; ++step) {
    ps.zero_grad();
    auto p = diff::clamp(diff::sigmoid(diff::linear(xtr, w, b)), 1e-7, 1 - 1e-7);
    auto pos = diff::mul(diff::log(p), ytr);
    auto neg = diff::mul(diff::log(diff::add_scalar(diff::scale(p, -1), 1)), diff::add_scalar(diff::scale(ytr, -1), 1));
    auto loss = diff::scale(diff::mean(diff::add(pos, neg)), -1);
    loss.backward();
    diff::optimizer_step(ps, {}, 0.05);
  }
  auto p = diff::sigmoid(diff::linear(xte, w.detach(), b.detach()));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) correct += (p.at(i) >= 0.5) == (yte.at(i) == 1.0);
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(p.numel()), 0.9);
}

TEST(Synth, DatasetOnDiskMatchesManifest) {
  TempDir dir;
  SynthSpec spec;
  spec.image_size = 48;
  spec.source_train = 20;
  spec.target_train = 6;
  spec.source_test = 3;
  spec.target_test = 4;
  auto m = synth_dataset(spec, 5, dir.path());
  auto back = load_manifest(dir.path() / "manifest.jsonl");
  EXPECT_EQ(format_manifest(back), format_manifest(m));
  EXPECT_EQ(back.select(Domain::source, Split::train).size(), 20u);
  for (const Record* r : back.select(Domain::target, Split::train)) EXPECT_FALSE(r->au.has_value());
  for (const Record* r : back.select(Domain::target, Split::test)) EXPECT_TRUE(r->au.has_value());
  for (double rate : back.stats.au_rates) {
    EXPECT_GE(rate, 0.0);
    EXPECT_LE(rate, 1.0);
  }
  for (double v : back.stats.mean_face) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  auto img = read_image(back.resolve(back.records[0]));
  EXPECT_EQ(img.shape(), (diff::Shape{3, 48, 48}));

  auto again = synth_dataset(spec, 5, dir.path() / "again");
  EXPECT_EQ(format_manifest(again), format_manifest(m));
}

TEST(Synth, AlignedLandmarksStayInFrame) {
  TempDir dir;
  SynthSpec spec;
  spec.source_train = 30;
  spec.target_train = 30;
  spec.source_test = spec.target_test = 0;
  auto m = synth_dataset(spec, 8, dir.path());
  const Geometry g{72, 64};
  for (Domain d : {Domain::source, Domain::target}) {
    auto ds = load_split(m, d, Split::train, g);
    for (const auto& s : ds.samples) {
      for (std::size_t i : m.schema.train_landmarks) {
        EXPECT_GT(s.landmarks[2 * i], 0.0);
        EXPECT_LT(s.landmarks[2 * i], 1.0);
        EXPECT_GT(s.landmarks[2 * i + 1], 0.0);
        EXPECT_LT(s.landmarks[2 * i + 1], 1.0);
      }
      EXPECT_NEAR(s.iod, 0.3, 1e-9);
    }
  }
}

// ---------------------------------------------------------------- batching

TEST(Batches, CountsAndTargetCycling) {
  BatchPlan plan(10, 4, 2, 7);
  EXPECT_EQ(plan.batches_per_epoch(), 5u);
  const auto e0 = plan.epoch(0);
  ASSERT_EQ(e0.size(), 5u);
  std::set<std::size_t> src;
  std::vector<std::size_t> tgt;
  for (const auto& b : e0) {
    EXPECT_EQ(b.source.size(), 2u);
    EXPECT_EQ(b.target.size(), 2u);
    src.insert(b.source.begin(), b.source.end());
    tgt.insert(tgt.end(), b.target.begin(), b.target.end());
  }
  EXPECT_EQ(src.size(), 10u);
  // 10 target slots over 4 samples: each full cycle visits every sample once.
  std::set<std::size_t> first(tgt.begin(), tgt.begin() + 4), second(tgt.begin() + 4, tgt.begin() + 8);
  EXPECT_EQ(first.size(), 4u);
  EXPECT_EQ(second.size(), 4u);

  EXPECT_EQ(BatchPlan(10, 4, 2, 7).epoch(0)[3].source, e0[3].source);
  EXPECT_NE(plan.epoch(1)[0].source, e0[0].source);
  EXPECT_EQ(BatchPlan(11, 4, 3, 1).batches_per_epoch(), 3u);
  EXPECT_THROW(BatchPlan(1, 4, 2, 1), Error);
  EXPECT_TRUE(BatchPlan(4, 0, 2, 1).epoch(0)[0].target.empty());
}

TEST(Batches, CollatedTensors) {
  TempDir dir;
  SynthSpec spec;
  spec.image_size = 48;
  spec.source_train = 6;
  spec.target_train = 3;
  spec.source_test = spec.target_test = 0;
  auto m = synth_dataset(spec, 2, dir.path());
  const Geometry g{40, 32};
  auto src = load_split(m, Domain::source, Split::train, g);
  auto tgt = load_split(m, Domain::target, Split::train, g);
  PairedBatches it(src, tgt, 2, 3, 0);
  EXPECT_EQ(it.size(), 3u);
  PairedBatch pb;
  std::size_t n = 0;
  while (it.next(pb)) {
    ++n;
    EXPECT_EQ(pb.source.images.shape(), (diff::Shape{2, 3, 32, 32}));
    EXPECT_EQ(pb.source.landmarks.shape(), (diff::Shape{2, 98}));
    EXPECT_EQ(pb.source.au.shape(), (diff::Shape{2, 6}));
    EXPECT_EQ(pb.target.images.dim(0), 2u);
    EXPECT_FALSE(pb.target.au.defined());
    EXPECT_EQ(pb.source.iod.size(), 2u);
  }
  EXPECT_EQ(n, 3u);

  PairedBatches a(src, tgt, 2, 3, 1), b(src, tgt, 2, 3, 1);
  PairedBatch x, y;
  while (a.next(x) && b.next(y)) {
    for (std::size_t i = 0; i < x.source.images.numel(); ++i) ASSERT_EQ(x.source.images.at(i), y.source.images.at(i));
    for (std::size_t i = 0; i < x.target.landmarks.numel(); ++i) ASSERT_EQ(x.target.landmarks.at(i), y.target.landmarks.at(i));
  }

  auto eval = make_batch(src, {0, 1}, false, 0);
  auto expected = center_crop(src.samples[0], g, m.schema);
  EXPECT_EQ(eval.landmarks.at(0), select_landmarks(expected.landmarks, m.schema)[0]);
}

}  // namespace
}  // namespace aurecon::data
