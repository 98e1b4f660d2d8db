#include "aurecon/datapipe/manifest.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "aurecon/common/error.hpp"
#include "aurecon/datapipe/align.hpp"

namespace aurecon::data {

std::string to_string(Domain d) { return d == Domain::source ? "source" : "target"; }
std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Domain parse_domain(const std::string& s) {
  if (s == "source") return Domain::source;
  if (s == "target") return Domain::target;
  throw FormatError("unknown domain '" + s + "' (expected source or target)");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw FormatError("unknown split '" + s + "' (expected train or test)");
}

LandmarkSchema LandmarkSchema::ibug68() {
  LandmarkSchema s;
  s.n_land = 68;
  s.eye_left = {36, 37, 38, 39, 40, 41};
  s.eye_right = {42, 43, 44, 45, 46, 47};
  for (std::size_t i = 17; i < 68; ++i) {
    if (i != 60 && i != 64) s.train_landmarks.push_back(i);
  }
  s.flip_pairs = {{0, 16},  {1, 15},  {2, 14},  {3, 13},  {4, 12},  {5, 11},  {6, 10},  {7, 9},
                  {17, 26}, {18, 25}, {19, 24}, {20, 23}, {21, 22}, {31, 35}, {32, 34}, {36, 45},
                  {37, 44}, {38, 43}, {39, 42}, {40, 47}, {41, 46}, {48, 54}, {49, 53}, {50, 52},
                  {55, 59}, {56, 58}, {60, 64}, {61, 63}, {65, 67}};
  return s;
}

std::vector<std::size_t> LandmarkSchema::flip_permutation() const {
  std::vector<std::size_t> perm(n_land);
  std::iota(perm.begin(), perm.end(), 0);
  for (auto [a, b] : flip_pairs) {
    perm[a] = b;
    perm[b] = a;
  }
  return perm;
}

void LandmarkSchema::validate() const {
  if (n_land < 2) throw FormatError("schema: n_land must be >= 2");
  auto check = [&](const std::vector<std::size_t>& idx, const char* what) {
    if (idx.empty()) throw FormatError(std::string("schema: ") + what + " is empty");
    for (std::size_t i : idx) {
      if (i >= n_land) throw FormatError(std::string("schema: ") + what + " index " + std::to_string(i) + " out of range");
    }
  };
  check(eye_left, "eye_left");
  check(eye_right, "eye_right");
  check(train_landmarks, "train_landmarks");
  std::set<std::size_t> seen;
  for (auto [a, b] : flip_pairs) {
    if (a >= n_land || b >= n_land || a == b || !seen.insert(a).second || !seen.insert(b).second) {
      throw FormatError("schema: flip pair (" + std::to_string(a) + ", " + std::to_string(b) + ") is invalid");
    }
  }
}

nlohmann::json LandmarkSchema::to_json() const {
  nlohmann::json pairs = nlohmann::json::array();
  for (auto [a, b] : flip_pairs) pairs.push_back({a, b});
  return {{"n_land", n_land},
          {"eye_left", eye_left},
          {"eye_right", eye_right},
          {"train_landmarks", train_landmarks},
          {"flip_pairs", pairs}};
}

LandmarkSchema LandmarkSchema::from_json(const nlohmann::json& j) {
  LandmarkSchema s;
  s.n_land = j.at("n_land").get<std::size_t>();
  s.eye_left = j.at("eye_left").get<std::vector<std::size_t>>();
  s.eye_right = j.at("eye_right").get<std::vector<std::size_t>>();
  s.train_landmarks = j.at("train_landmarks").get<std::vector<std::size_t>>();
  for (const auto& p : j.at("flip_pairs")) s.flip_pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
  s.validate();
  return s;
}

std::filesystem::path Manifest::resolve(const Record& r) const {
  std::filesystem::path p(r.path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<const Record*> Manifest::select(Domain d, Split s) const {
  std::vector<const Record*> out;
  for (const auto& r : records) {
    if (r.domain == d && r.split == s) out.push_back(&r);
  }
  return out;
}

void Manifest::compute_stats() {
  stats = ManifestStats{};
  stats.au_rates.assign(n_au, 0.0);
  stats.mean_face.assign(2 * schema.n_land, 0.0);
  for (const Record* r : select(Domain::source, Split::train)) {
    ++stats.source_train;
    for (std::size_t k = 0; k < n_au; ++k) stats.au_rates[k] += (*r->au)[k];
    const auto aligned = align_landmarks(r->landmarks, schema);
    for (std::size_t i = 0; i < aligned.size(); ++i) stats.mean_face[i] += aligned[i];
  }
  if (stats.source_train == 0) return;
  const auto n = static_cast<double>(stats.source_train);
  for (std::size_t k = 0; k < n_au; ++k) {
    stats.au_rates[k] /= n;
    if (stats.au_rates[k] <= 0.0 || stats.au_rates[k] >= 1.0) {
      warnings.push_back("AU " + (k < au_names.size() ? au_names[k] : std::to_string(k)) + " has occurrence rate " +
                         std::to_string(stats.au_rates[k]) + " in source training records");
    }
  }
  for (double& v : stats.mean_face) v /= n;
}

namespace {

Record parse_record(const nlohmann::json& j, const Manifest& m, std::size_t line) {
  const std::string where = "manifest line " + std::to_string(line) + ": ";
  try {
    Record r;
    r.path = j.at("path").get<std::string>();
    if (r.path.empty()) throw FormatError("empty path");
    r.domain = parse_domain(j.at("domain").get<std::string>());
    r.split = parse_split(j.value("split", std::string("train")));
    r.landmarks = j.at("landmarks").get<std::vector<double>>();
    if (r.landmarks.size() != 2 * m.schema.n_land) {
      throw FormatError("expected " + std::to_string(2 * m.schema.n_land) + " landmark coordinates (n_land " +
                        std::to_string(m.schema.n_land) + "), got " + std::to_string(r.landmarks.size()));
    }
    for (double v : r.landmarks) {
      if (!std::isfinite(v)) throw FormatError("non-finite landmark coordinate");
    }
    const auto& au = j.at("au");
    if (au.is_string()) {
      if (au.get<std::string>() != "-") throw FormatError("au must be a label list or \"-\"");
    } else {
      auto labels = au.get<std::vector<int>>();
      if (labels.size() != m.n_au) {
        throw FormatError("expected " + std::to_string(m.n_au) + " AU labels, got " + std::to_string(labels.size()));
      }
      for (int v : labels) {
        if (v != 0 && v != 1) throw FormatError("AU labels must be 0 or 1");
      }
      r.au = std::move(labels);
    }
    if (r.domain == Domain::source && !r.au) throw FormatError("source records must carry AU labels");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + e.what());
  } catch (const FormatError& e) {
    throw FormatError(where + e.what());
  }
}

}  // namespace

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::set<std::string> paths;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_header) {
      try {
        if (j.at("format").get<std::string>() != "aurecon.manifest") throw FormatError("not an aurecon manifest");
        const int version = j.at("version").get<int>();
        if (version != kManifestVersion) throw FormatError("unsupported manifest version " + std::to_string(version));
        m.schema = LandmarkSchema::from_json(j.at("schema"));
        m.n_au = j.at("n_au").get<std::size_t>();
        m.au_names = j.value("au_names", std::vector<std::string>{});
        if (!m.au_names.empty() && m.au_names.size() != m.n_au) throw FormatError("au_names length differs from n_au");
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest line " + std::to_string(lineno) + " (header): " + e.what());
      } catch (const FormatError& e) {
        throw FormatError("manifest line " + std::to_string(lineno) + " (header): " + e.what());
      }
      have_header = true;
      continue;
    }
    auto rec = parse_record(j, m, lineno);
    if (!paths.insert(rec.path).second) {
      m.warnings.push_back("manifest line " + std::to_string(lineno) + ": duplicate image path " + rec.path);
    }
    m.records.push_back(std::move(rec));
  }
  if (!have_header) throw FormatError("manifest is empty");
  m.compute_stats();
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

std::string format_manifest(const Manifest& m) {
  std::string out;
  nlohmann::json header = {{"format", "aurecon.manifest"},
                           {"version", kManifestVersion},
                           {"schema", m.schema.to_json()},
                           {"n_au", m.n_au},
                           {"au_names", m.au_names}};
  out += header.dump() + "\n";
  for (const auto& r : m.records) {
    nlohmann::json j = {{"path", r.path},
                        {"domain", to_string(r.domain)},
                        {"split", to_string(r.split)},
                        {"landmarks", r.landmarks}};
    if (r.au) {
      j["au"] = *r.au;
    } else {
      j["au"] = "-";
    }
    out += j.dump() + "\n";
  }
  return out;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << format_manifest(m);
  if (!out) throw Error("failed writing manifest " + path.string());
}

}  // namespace aurecon::data
