#include "patchprint/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>

#include "patchprint/errors.hpp"

namespace patchprint {
namespace {

constexpr char kMagic[4] = {'S', 'S', 'P', 'C'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const unsigned char* p, size_t n) : p_(p), n_(n) {}

  std::uint32_t u32() {
    need(4);
    const std::uint32_t v = static_cast<std::uint32_t>(p_[pos_]) |
                            (static_cast<std::uint32_t>(p_[pos_ + 1]) << 8) |
                            (static_cast<std::uint32_t>(p_[pos_ + 2]) << 16) |
                            (static_cast<std::uint32_t>(p_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }
  unsigned char u8() {
    need(1);
    return p_[pos_++];
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  bool done() const { return pos_ == n_; }

 private:
  void need(size_t n) {
    if (pos_ + n > n_) throw IoError("checkpoint: truncated file");
  }
  const unsigned char* p_;
  size_t n_, pos_ = 0;
};

}  // namespace

const TensorEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, e] : entries)
    if (n == name) return &e;
  return nullptr;
}

std::string Checkpoint::meta_or(const std::string& key, const std::string& fallback) const {
  const auto it = meta.find(key);
  return it == meta.end() ? fallback : it->second;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(ck.meta.size()));
  for (const auto& [k, v] : ck.meta) {
    put_u32(buf, static_cast<std::uint32_t>(k.size()));
    buf.append(k);
    put_u32(buf, static_cast<std::uint32_t>(v.size()));
    buf.append(v);
  }
  put_u32(buf, static_cast<std::uint32_t>(ck.entries.size()));
  for (const auto& [name, e] : ck.entries) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.append(name);
    buf.push_back(0);  // dtype f32
    buf.push_back(static_cast<char>(e.shape.size()));
    size_t numel = 1;
    for (const int d : e.shape) {
      put_u32(buf, static_cast<std::uint32_t>(d));
      numel *= static_cast<size_t>(d);
    }
    if (numel != e.data.size()) throw CorruptData("checkpoint: entry extents disagree with data");
    for (const float v : e.data) put_f32(buf, v);
  }

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("checkpoint: cannot open for write: " + path);
  if (std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size())
    throw IoError("checkpoint: short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw FileNotFound("checkpoint: no such file: " + path);
  std::string raw;
  char chunk[1 << 16];
  size_t got;
  while ((got = std::fread(chunk, 1, sizeof chunk, f.get())) > 0) raw.append(chunk, got);
  if (std::ferror(f.get())) throw IoError("checkpoint: read failed: " + path);

  if (raw.size() < 8 || std::memcmp(raw.data(), kMagic, 4) != 0)
    throw BadMagic("checkpoint: bad magic in " + path);
  Reader r(reinterpret_cast<const unsigned char*>(raw.data()) + 4, raw.size() - 4);
  const std::uint32_t ver = r.u32();
  if (ver != kVersion)
    throw VersionMismatch("checkpoint: format version " + std::to_string(ver) +
                          ", expected " + std::to_string(kVersion));

  Checkpoint ck;
  const std::uint32_t nmeta = r.u32();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.bytes(r.u32());
    std::string v = r.bytes(r.u32());
    ck.meta.emplace(std::move(k), std::move(v));
  }
  const std::uint32_t nent = r.u32();
  for (std::uint32_t i = 0; i < nent; ++i) {
    std::string name = r.bytes(r.u32());
    const unsigned char dtype = r.u8();
    if (dtype != 0) throw CorruptData("checkpoint: unknown dtype code");
    const unsigned char rank = r.u8();
    TensorEntry e;
    size_t numel = 1;
    for (int d = 0; d < rank; ++d) {
      e.shape.push_back(static_cast<int>(r.u32()));
      numel *= static_cast<size_t>(e.shape.back());
    }
    e.data.resize(numel);
    for (size_t j = 0; j < numel; ++j) e.data[j] = r.f32();
    ck.entries.emplace_back(std::move(name), std::move(e));
  }
  if (!r.done()) throw CorruptData("checkpoint: trailing bytes in " + path);
  return ck;
}

Checkpoint checkpoint_from(const models::ParamSet& ps,
                           const std::map<std::string, std::string>& meta) {
  Checkpoint ck;
  ck.meta = meta;
  for (const auto& [name, t] : ps.tensors) {
    TensorEntry e;
    e.shape = t->shape;
    e.data = t->value;
    ck.entries.emplace_back(name, std::move(e));
  }
  for (const auto& [name, buf] : ps.buffers) {
    TensorEntry e;
    e.shape = {static_cast<int>(buf->size())};
    e.data = *buf;
    ck.entries.emplace_back(name, std::move(e));
  }
  return ck;
}

void load_into(const Checkpoint& ck, models::ParamSet& ps) {
  for (auto& [name, t] : ps.tensors) {
    const TensorEntry* e = ck.find(name);
    if (!e) throw CorruptData("checkpoint: missing entry " + name);
    if (e->shape != t->shape) throw CorruptData("checkpoint: shape clash for " + name);
    t->value = e->data;
  }
  for (auto& [name, buf] : ps.buffers) {
    const TensorEntry* e = ck.find(name);
    if (!e) throw CorruptData("checkpoint: missing entry " + name);
    if (e->data.size() != buf->size()) throw CorruptData("checkpoint: size clash for " + name);
    *buf = e->data;
  }
}

std::string digest64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace patchprint
