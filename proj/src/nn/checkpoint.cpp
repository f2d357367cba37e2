#include "sawt/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace sawt::nn {
namespace {

constexpr char kMagic[8] = {'S', 'A', 'W', 'T', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::vector<unsigned char>& bytes, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  template <typename T>
  void le(T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f32(float f) { le(std::bit_cast<std::uint32_t>(f)); }
  void str(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<unsigned char> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b, std::size_t limit) : bytes_(b), limit_(limit) {}
  void need(std::size_t n) const {
    if (pos_ + n > limit_) throw DataError("checkpoint truncated");
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  std::string str() {
    const auto n = le<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.le(kCheckpointVersion);
  w.str(ckpt.meta.dump());
  w.le(ckpt.adam_step);
  w.le(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    w.str(e.name);
    w.le(e.rows);
    w.le(e.cols);
    for (float f : e.value) w.f32(f);
    for (float f : e.adam_m) w.f32(f);
    for (float f : e.adam_v) w.f32(f);
  }
  w.le(fnv1a(w.bytes, w.bytes.size()));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw DataError("cannot write checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError(path.string() + " is not a checkpoint");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (std::size_t i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  if (stored != fnv1a(bytes, body)) throw DataError("checkpoint checksum mismatch: " + path.string());

  Reader r(bytes, body);
  r.need(sizeof kMagic);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.le<std::uint8_t>();
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.meta = nlohmann::json::parse(r.str());
  ckpt.adam_step = r.le<std::uint64_t>();
  const auto count = r.le<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    e.name = r.str();
    e.rows = r.le<std::uint32_t>();
    e.cols = r.le<std::uint32_t>();
    const std::size_t n = static_cast<std::size_t>(e.rows) * e.cols;
    r.need(12 * n);
    for (auto* v : {&e.value, &e.adam_m, &e.adam_v}) {
      v->resize(n);
      for (auto& f : *v) f = r.f32();
    }
    ckpt.entries.push_back(std::move(e));
  }
  if (r.pos() != body) throw DataError("checkpoint has trailing bytes");
  return ckpt;
}

}  // namespace sawt::nn
