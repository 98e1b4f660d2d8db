#include "aurecon/datapipe/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "aurecon/common/error.hpp"

namespace aurecon::data {

namespace {

// Reads the next whitespace-separated header token, skipping '#' comments.
std::string next_token(const std::string& buf, std::size_t& pos, const std::string& where) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  if (start == pos) throw FormatError(where + ": truncated header");
  return buf.substr(start, pos - start);
}

std::size_t parse_positive(const std::string& tok, const std::string& where) {
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || v == 0) throw FormatError(where + ": bad header value '" + tok + "'");
  return v;
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image " + where);
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  const auto magic = next_token(buf, pos, where);
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw FormatError(where + ": unsupported image type '" + magic + "' (need binary P5 or P6)");
  }
  const std::size_t w = parse_positive(next_token(buf, pos, where), where);
  const std::size_t h = parse_positive(next_token(buf, pos, where), where);
  const std::size_t maxval = parse_positive(next_token(buf, pos, where), where);
  if (maxval > 255) throw FormatError(where + ": 16-bit images are not supported");
  ++pos;  // single whitespace byte before the raster

  const std::size_t n = w * h * channels;
  if (buf.size() < pos + n) throw FormatError(where + ": raster truncated");
  std::vector<double> values(n);
  // Interleaved HWC on disk, planar CHW in memory.
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        const auto byte = static_cast<unsigned char>(buf[pos + (y * w + x) * channels + c]);
        values[(c * h + y) * w + x] = static_cast<double>(byte) / static_cast<double>(maxval);
      }
    }
  }
  return Tensor::from({channels, h, w}, std::move(values));
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ShapeError("write_image: expected (1 or 3, H, W), got " + diff::shape_str(image.shape()));
  }
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image " + path.string());
  out << (c == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << "\n255\n";
  std::string raster(w * h * c, '\0');
  const auto d = image.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        const double v = std::clamp(d[(k * h + y) * w + x], 0.0, 1.0);
        raster[(y * w + x) * c + k] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
    }
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw Error("failed writing image " + path.string());
}

}  // namespace aurecon::data
