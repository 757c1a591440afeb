#include "serb/feature_cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <system_error>

namespace serb {

static_assert(std::endian::native == std::endian::little, "cache format assumes little-endian");

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t state) {
  for (std::byte b : bytes) {
    state ^= static_cast<std::uint64_t>(b);
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    h = fnv1a64(std::as_bytes(std::span<const char>(buf.data(), got)), h);
  }
  return h;
}

const CacheEntry* FeatureCache::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

namespace {

constexpr char kMagic[4] = {'S', 'E', 'R', 'B'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof v);
  }
  std::size_t size() const { return buf_.size(); }
  std::uint64_t hash_from(std::size_t start) const {
    return fnv1a64(std::as_bytes(std::span<const char>(buf_.data() + start, buf_.size() - start)));
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string name) : buf_(std::move(data)), name_(std::move(name)) {}

  bool has(std::size_t n) const { return pos_ + n <= buf_.size(); }
  void bytes(void* p, std::size_t n, const std::string& what) {
    if (!has(n)) throw CacheError(name_ + ": truncated while reading " + what);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod(const std::string& what) {
    T v;
    bytes(&v, sizeof v, what);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return buf_.size(); }
  std::uint64_t hash_range(std::size_t start, std::size_t end) const {
    return fnv1a64(std::as_bytes(std::span<const char>(buf_.data() + start, end - start)));
  }

 private:
  std::vector<char> buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_cache(const std::filesystem::path& path, const FeatureCache& cache) {
  Writer w;
  w.bytes(kMagic, 4);
  w.pod<std::uint32_t>(kVersion);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(cache.set));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(cache.kind));
  w.pod<std::uint64_t>(cache.target_frames);
  w.pod<std::uint64_t>(cache.entries.size());
  for (const auto& e : cache.entries) {
    if (e.data.size() != e.rows * e.cols) {
      throw CacheError("entry '" + e.id + "': payload size does not match its shape");
    }
    const std::size_t start = w.size();
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(e.id.size()));
    w.bytes(e.id.data(), e.id.size());
    w.pod<std::uint64_t>(e.content_hash);
    w.pod<std::uint64_t>(e.rows);
    w.pod<std::uint64_t>(e.cols);
    w.bytes(e.data.data(), e.data.size() * sizeof(float));
    w.pod<std::uint64_t>(w.hash_from(start));
  }
  w.pod<std::uint64_t>(w.hash_from(0));

  // Write to a sibling temp file and rename, so readers never see a torn file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CacheError("cannot write " + tmp.string());
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    out.flush();
    if (!out) throw CacheError("write failed (disk full?): " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CacheError("cannot replace " + path.string() + ": " + ec.message());
}

FeatureCache read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open cache " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.filename().string();
  Reader r(std::move(data), name);

  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw CacheError(name + ": not a feature cache");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kVersion) {
    throw CacheError(name + ": unsupported version " + std::to_string(version));
  }
  FeatureCache cache;
  const auto set = r.pod<std::uint32_t>("set id");
  const auto kind = r.pod<std::uint32_t>("kind");
  if (set > 2 || kind > 1) throw CacheError(name + ": bad set/kind header");
  cache.set = static_cast<FeatureSet>(set);
  cache.kind = static_cast<FeatureKind>(kind);
  cache.target_frames = r.pod<std::uint64_t>("target_frames");
  const auto n = r.pod<std::uint64_t>("entry count");

  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string what = "entry " + std::to_string(i);
    const std::size_t start = r.pos();
    CacheEntry e;
    const auto id_len = r.pod<std::uint32_t>(what);
    if (!r.has(id_len)) throw CacheError(name + ": truncated while reading " + what);
    e.id.resize(id_len);
    r.bytes(e.id.data(), id_len, what);
    const std::string label = "entry '" + e.id + "'";
    e.content_hash = r.pod<std::uint64_t>(label);
    e.rows = r.pod<std::uint64_t>(label);
    e.cols = r.pod<std::uint64_t>(label);
    const std::uint64_t count = e.rows * e.cols;
    if (e.cols != 0 && count / e.cols != e.rows) throw CacheError(name + ": " + label + " bad shape");
    if (!r.has(count * sizeof(float))) throw CacheError(name + ": truncated in " + label);
    e.data.resize(count);
    r.bytes(e.data.data(), count * sizeof(float), label);
    const std::uint64_t expect = r.hash_range(start, r.pos());
    if (r.pod<std::uint64_t>(label) != expect) {
      throw CacheError(name + ": checksum mismatch in " + label);
    }
    cache.entries.push_back(std::move(e));
  }
  const std::uint64_t expect = r.hash_range(0, r.pos());
  if (r.pod<std::uint64_t>("trailing checksum") != expect) {
    throw CacheError(name + ": file checksum mismatch (partial write?)");
  }
  if (r.pos() != r.size()) throw CacheError(name + ": trailing bytes after checksum");
  return cache;
}

namespace {

std::string cache_stem(Task task, FeatureSet set, FeatureKind kind) {
  return std::string(to_string(task)) + "_" + std::string(to_string(set)) + "_" +
         std::string(to_string(kind));
}

}  // namespace

std::filesystem::path cache_path(const std::filesystem::path& dir, Task task, FeatureSet set,
                                 FeatureKind kind) {
  return dir / (cache_stem(task, set, kind) + ".serb");
}

std::filesystem::path manifest_path(const std::filesystem::path& dir, Task task, FeatureSet set,
                                    FeatureKind kind) {
  return dir / (cache_stem(task, set, kind) + ".json");
}

}  // namespace serb
