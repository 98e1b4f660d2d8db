#include "aurecon/diffcore/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "aurecon/common/error.hpp"

namespace aurecon::diff {

namespace {

constexpr char kMagic[8] = {'A', 'U', 'R', 'E', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) { uint(v, 4); }
  void u64(std::uint64_t v) { uint(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;

 private:
  void uint(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(p_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::add_store(const std::string& prefix, const ParamStore& store) {
  for (const auto& e : store.entries()) {
    CheckpointEntry ce;
    ce.name = prefix + e.name;
    ce.shape = e.value.shape();
    ce.values.assign(e.value.data().begin(), e.value.data().end());
    ce.state = e.state;
    entries.push_back(std::move(ce));
  }
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

void Checkpoint::restore_store(const std::string& prefix, ParamStore& store) const {
  // Validate everything first so a mismatch leaves the store untouched.
  std::vector<const CheckpointEntry*> found;
  for (const auto& e : store.entries()) {
    const auto* ce = find(prefix + e.name);
    if (!ce) throw FormatError("checkpoint lacks parameter '" + prefix + e.name + "'");
    if (ce->shape != e.value.shape()) {
      throw FormatError("checkpoint parameter '" + ce->name + "' has shape " + shape_str(ce->shape) +
                        ", expected " + shape_str(e.value.shape()));
    }
    found.push_back(ce);
  }
  for (std::size_t i = 0; i < found.size(); ++i) {
    auto& e = store.entries()[i];
    std::copy(found[i]->values.begin(), found[i]->values.end(), e.value.mutable_data().begin());
    e.state = found[i]->state;
  }
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  w.u64(ckpt.manifest.size());
  w.bytes(ckpt.manifest.data(), ckpt.manifest.size());
  w.u64(ckpt.entries.size());
  for (const auto& e : ckpt.entries) {
    if (shape_numel(e.shape) != e.values.size()) {
      throw Error("checkpoint entry '" + e.name + "' has inconsistent shape/value count");
    }
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) w.u64(d);
    w.u64(e.state.step);
    w.u64(e.state.m.size());
    for (double v : e.values) w.f64(v);
    for (double v : e.state.m) w.f64(v);
    for (double v : e.state.v) w.f64(v);
  }
  w.u64(fnv1a(w.out.data(), w.out.size()));
  return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  if (bytes.size() < sizeof(kMagic) + 4 + 8) throw FormatError("checkpoint truncated in header");
  Reader r(bytes.data(), bytes.size());
  r.str(sizeof(kMagic));
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = bytes.size() - 8;
  const std::uint64_t stored = Reader(bytes.data() + body, 8).u64();
  if (stored != fnv1a(bytes.data(), body)) throw FormatError("checkpoint hash mismatch (corrupt or truncated)");

  Reader br(bytes.data(), body);
  br.str(sizeof(kMagic));
  br.u32();
  Checkpoint ckpt;
  ckpt.manifest = br.str(br.u64());
  const auto count = br.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    e.name = br.str(br.u32());
    const auto rank = br.u32();
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(br.u64());
    e.state.step = br.u64();
    const auto mlen = br.u64();
    const auto n = shape_numel(e.shape);
    if ((n + 2 * mlen) * 8 > br.remaining()) throw FormatError("checkpoint truncated in '" + e.name + "'");
    e.values.resize(n);
    for (auto& v : e.values) v = br.f64();
    e.state.m.resize(mlen);
    e.state.v.resize(mlen);
    for (auto& v : e.state.m) v = br.f64();
    for (auto& v : e.state.v) v = br.f64();
    ckpt.entries.push_back(std::move(e));
  }
  if (br.remaining() != 0) throw FormatError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace aurecon::diff
