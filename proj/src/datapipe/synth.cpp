#include "aurecon/datapipe/synth.hpp"

#include <cmath>
#include <numbers>

#include "aurecon/common/error.hpp"
#include "aurecon/datapipe/image_io.hpp"

namespace aurecon::data {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAuAlpha = 0.85;
constexpr double kBlobGain = 0.8;

struct Anchor {
  std::size_t landmark;
  double dx, dy;  // unit-face offset
};

// Per-AU anchor sets, cycled when n_au > 6: inner brows, outer brows,
// glabella, cheeks, lip corners, chin. Every AU gets two regions so that
// all of them cover a similar share of the face.
const std::vector<std::vector<Anchor>>& au_anchors() {
  static const std::vector<std::vector<Anchor>> a = {
      {{21, 0.0, 0.0}, {22, 0.0, 0.0}},   {{17, 0.0, 0.0}, {26, 0.0, 0.0}},
      {{27, -0.07, 0.09}, {27, 0.07, 0.09}}, {{41, 0.0, 0.10}, {46, 0.0, 0.10}},
      {{48, -0.02, 0.0}, {54, 0.02, 0.0}},  {{57, -0.08, 0.06}, {57, 0.08, 0.06}},
  };
  return a;
}

std::array<double, 3> au_color(std::size_t k) {
  static const std::array<std::array<double, 3>, 6> palette = {{{1.0, 0.15, 0.15},
                                                                {0.15, 1.0, 0.15},
                                                                {0.15, 0.15, 1.0},
                                                                {1.0, 1.0, 0.1},
                                                                {1.0, 0.1, 1.0},
                                                                {0.1, 1.0, 1.0}}};
  return palette[k % palette.size()];
}

double blob_sigma(const SynthFace& f) { return 0.012 * f.face_side; }

}  // namespace

void SynthSpec::validate() const {
  if (image_size < 32) throw Error("synth: image_size must be >= 32");
  if (channels != 1 && channels != 3) throw Error("synth: channels must be 1 or 3");
  if (n_au == 0) throw Error("synth: n_au must be >= 1");
  if (!(au_prevalence > 0.0 && au_prevalence < 1.0)) throw Error("synth: au_prevalence must be in (0, 1)");
}

const std::vector<double>& face_template() {
  static const std::vector<double> t = [] {
    std::vector<double> p(136, 0.0);
    auto set = [&](std::size_t i, double x, double y) {
      p[2 * i] = x;
      p[2 * i + 1] = y;
    };
    auto mirror = [&](std::size_t dst, std::size_t src) { set(dst, 1.0 - p[2 * src], p[2 * src + 1]); };
    for (std::size_t i = 0; i <= 16; ++i) {
      const double th = (170.0 - 10.0 * static_cast<double>(i)) * kPi / 180.0;
      set(i, 0.5 + 0.40 * std::cos(th), 0.42 + 0.46 * std::sin(th));
    }
    for (std::size_t k = 0; k < 5; ++k) {
      const double t01 = static_cast<double>(k) / 4.0;
      set(17 + k, 0.18 + 0.24 * t01, 0.30 - 0.04 * std::sin(kPi * t01));
      mirror(26 - k, 17 + k);
    }
    for (std::size_t k = 0; k < 4; ++k) set(27 + k, 0.5, 0.36 + 0.07 * static_cast<double>(k));
    set(31, 0.42, 0.60);
    set(32, 0.46, 0.615);
    set(33, 0.50, 0.62);
    mirror(34, 32);
    mirror(35, 31);
    const double ex = 0.32, ey = 0.40;
    set(36, ex - 0.07, ey);
    set(37, ex - 0.025, ey - 0.03);
    set(38, ex + 0.025, ey - 0.03);
    set(39, ex + 0.07, ey);
    set(40, ex + 0.025, ey + 0.03);
    set(41, ex - 0.025, ey + 0.03);
    mirror(42, 39);
    mirror(43, 38);
    mirror(44, 37);
    mirror(45, 36);
    mirror(46, 41);
    mirror(47, 40);
    set(48, 0.36, 0.76);
    set(49, 0.41, 0.725);
    set(50, 0.46, 0.715);
    set(51, 0.50, 0.72);
    mirror(52, 50);
    mirror(53, 49);
    mirror(54, 48);
    set(59, 0.41, 0.80);
    set(58, 0.46, 0.815);
    set(57, 0.50, 0.82);
    mirror(56, 58);
    mirror(55, 59);
    set(60, 0.39, 0.76);
    set(61, 0.45, 0.745);
    set(62, 0.50, 0.745);
    mirror(63, 61);
    mirror(64, 60);
    set(67, 0.45, 0.775);
    set(66, 0.50, 0.78);
    mirror(65, 67);
    return p;
  }();
  return t;
}

double landmark_blob_radius(const SynthFace& face) { return 3.0 * blob_sigma(face); }

double au_region_radius(const SynthFace& face, std::size_t k) {
  return (0.15 + 0.02 * static_cast<double>(k % 3)) * face.face_side;
}

std::vector<std::array<double, 2>> au_region_centres(const SynthFace& face, std::size_t k) {
  const auto& anchors = au_anchors()[k % au_anchors().size()];
  const double c = std::cos(face.rotation), s = std::sin(face.rotation);
  std::vector<std::array<double, 2>> out;
  for (const auto& a : anchors) {
    const double dx = a.dx * face.face_side, dy = a.dy * face.face_side;
    out.push_back({face.landmarks[2 * a.landmark] + c * dx - s * dy, face.landmarks[2 * a.landmark + 1] + s * dx + c * dy});
  }
  return out;
}

SynthFace sample_face(const SynthSpec& spec, Domain domain, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  std::normal_distribution<double> jitter(0.0, 0.004);

  const auto size = static_cast<double>(spec.image_size);
  SynthFace f;
  f.rotation = uni(-12.0, 12.0) * kPi / 180.0;
  f.face_side = 0.75 * size * uni(0.9, 1.1);
  const double cx = size * (0.5 + uni(-0.04, 0.04)), cy = size * (0.5 + uni(-0.04, 0.04));
  const double c = std::cos(f.rotation), s = std::sin(f.rotation);
  const auto& tmpl = face_template();
  f.landmarks.resize(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); i += 2) {
    const double ux = tmpl[i] - 0.5 + jitter(rng), uy = tmpl[i + 1] - 0.5 + jitter(rng);
    f.landmarks[i] = cx + f.face_side * (c * ux - s * uy);
    f.landmarks[i + 1] = cy + f.face_side * (s * ux + c * uy);
  }
  f.au.resize(spec.n_au);
  std::bernoulli_distribution on(spec.au_prevalence);
  for (auto& v : f.au) v = on(rng) ? 1 : 0;

  auto& bg = f.background;
  bg.domain = domain;
  bg.angle = uni(0.0, kPi);
  bg.phase = uni(0.0, 2.0 * kPi);
  bg.period = size * uni(0.06, 0.1);
  const double lum = uni(0.28, 0.42);
  for (auto& b : bg.base) b = lum + uni(-0.05, 0.05);
  bg.amplitude = uni(0.12, 0.18);
  return f;
}

diff::Tensor render_face(const SynthFace& face, const SynthSpec& spec, const RenderOptions& opts) {
  const std::size_t n = spec.image_size, ch = spec.channels;
  const auto size = static_cast<double>(n);
  std::vector<double> img(ch * n * n, 0.0);
  auto at = [&](std::size_t c, std::size_t y, std::size_t x) -> double& { return img[(c * n + y) * n + x]; };
  const auto& bg = face.background;

  if (opts.layers & kBackgroundLayer) {
    const double ca = std::cos(bg.angle), sa = std::sin(bg.angle);
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
        double v;
        if (bg.domain == Domain::source) {
          v = 2.0 * bg.amplitude * ((px / size - 0.5) * ca + (py / size - 0.5) * sa);
        } else {
          v = bg.amplitude * std::tanh(3.0 * std::sin(2.0 * kPi * (px * ca + py * sa) / bg.period + bg.phase));
        }
        for (std::size_t c = 0; c < ch; ++c) {
          const double base = ch == 1 ? (bg.base[0] + bg.base[1] + bg.base[2]) / 3.0 : bg.base[c];
          at(c, y, x) = base + v;
        }
      }
    }
  }

  // Paints a bump of the given radius around (cx, cy) through `blend`.
  auto stamp = [&](double cx, double cy, double radius, auto&& profile, auto&& blend) {
    const long x0 = static_cast<long>(std::floor(cx - radius)), x1 = static_cast<long>(std::ceil(cx + radius));
    const long y0 = static_cast<long>(std::floor(cy - radius)), y1 = static_cast<long>(std::ceil(cy + radius));
    for (long y = std::max(0L, y0); y <= std::min<long>(static_cast<long>(n) - 1, y1); ++y) {
      for (long x = std::max(0L, x0); x <= std::min<long>(static_cast<long>(n) - 1, x1); ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
        const double d = std::hypot(dx, dy);
        if (d >= radius) continue;
        const double w = profile(d);
        for (std::size_t c = 0; c < ch; ++c) blend(at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)), c, w);
      }
    }
  };

  if (opts.layers & kAuLayer) {
    for (std::size_t k = 0; k < face.au.size(); ++k) {
      if (!face.au[k]) continue;
      const auto color = au_color(k);
      const double gray = (color[0] + color[1] + color[2]) / 3.0;
      const double r = au_region_radius(face, k);
      for (const auto& centre : au_region_centres(face, k)) {
        stamp(centre[0], centre[1], r,
              [r](double d) {
                const double q = 1.0 - (d / r) * (d / r);
                return q * q;
              },
              [&](double& px, std::size_t c, double w) {
                const double target = ch == 1 ? gray : color[c];
                px = px * (1.0 - kAuAlpha * w) + target * kAuAlpha * w;
              });
      }
    }
  }

  if (opts.layers & kLandmarkLayer) {
    const double sigma = blob_sigma(face), radius = landmark_blob_radius(face);
    const std::size_t count = face.landmarks.size() / 2;
    for (std::size_t i = 0; i < count; ++i) {
      if (opts.only_landmark >= 0 && static_cast<std::size_t>(opts.only_landmark) != i) continue;
      stamp(face.landmarks[2 * i], face.landmarks[2 * i + 1], radius,
            [sigma](double d) { return std::exp(-d * d / (2.0 * sigma * sigma)); },
            [](double& px, std::size_t, double w) { px += (1.0 - px) * kBlobGain * w; });
    }
  }

  for (double& v : img) v = std::clamp(v, 0.0, 1.0);
  return diff::Tensor::from({ch, n, n}, std::move(img));
}

Manifest synth_dataset(const SynthSpec& spec, std::uint64_t seed, const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir / "images");
  Manifest m;
  m.base_dir = out_dir;
  m.schema = LandmarkSchema::ibug68();
  m.n_au = spec.n_au;
  for (std::size_t k = 0; k < spec.n_au; ++k) m.au_names.push_back("AU" + std::to_string(k + 1));

  std::mt19937_64 rng(seed);
  const char* ext = spec.channels == 1 ? ".pgm" : ".ppm";
  struct Part {
    Domain domain;
    Split split;
    std::size_t count;
  };
  const Part parts[] = {{Domain::source, Split::train, spec.source_train},
                        {Domain::target, Split::train, spec.target_train},
                        {Domain::source, Split::test, spec.source_test},
                        {Domain::target, Split::test, spec.target_test}};
  for (const auto& part : parts) {
    for (std::size_t i = 0; i < part.count; ++i) {
      const auto face = sample_face(spec, part.domain, rng);
      char name[64];
      std::snprintf(name, sizeof name, "%s_%s_%04zu%s", to_string(part.domain).c_str(), to_string(part.split).c_str(), i,
                    ext);
      Record r;
      r.path = std::string("images/") + name;
      r.domain = part.domain;
      r.split = part.split;
      r.landmarks = face.landmarks;
      if (!(part.domain == Domain::target && part.split == Split::train)) r.au = face.au;
      write_image(out_dir / r.path, render_face(face, spec));
      m.records.push_back(std::move(r));
    }
  }
  m.compute_stats();
  save_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

}  // namespace aurecon::data
