#include "ktrees/repr_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <thread>

#include "json.hpp"
#include "ktrees/hashing.hpp"

namespace ktrees::repr {
namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'K', 'T', 'B', '1'};
constexpr char kProjectionMagic[4] = {'K', 'T', 'K', '1'};
constexpr std::uint32_t kProjectionVersion = 1;
constexpr std::size_t kProjectionChunk = 1024;

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void floats(const float* p, std::size_t n) {
    out_.reserve(out_.size() + 4 * n);
    for (std::size_t i = 0; i < n; ++i) put_le(std::bit_cast<std::uint32_t>(p[i]));
  }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
  }
  std::vector<std::byte> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw BundleError(BundleError::Kind::Truncated, std::string("truncated payload while reading ") + what);
    }
  }
  std::span<const std::byte> raw(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(const char* what) { return get_le<std::uint32_t>(what); }
  std::uint64_t u64(const char* what) { return get_le<std::uint64_t>(what); }
  void floats(float* dst, std::size_t n, const char* what) {
    if (n > (bytes_.size() - pos_) / 4) need(4 * n, what);
    for (std::size_t i = 0; i < n; ++i) dst[i] = std::bit_cast<float>(get_le<std::uint32_t>(what));
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(std::to_integer<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError(BundleError::Kind::Io, "cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(buf.size());
  std::memcpy(out.data(), buf.data(), buf.size());
  return out;
}

json meta_to_json(const ReprBundle& b) {
  json j = json::object();
  for (const auto& [key, value] : b.meta.extra) j[key] = json::parse(value);
  j["model"] = b.meta.model;
  j["repr_layer"] = b.meta.repr_layer;
  j["ffn_layer"] = b.meta.ffn_layer;
  json index = json::array();
  for (const auto& k : b.index) index.push_back(json::array({k.sentence_id, k.token_index}));
  j["index"] = std::move(index);
  return j;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

const char* to_string(ProbingObject kind) {
  return kind == ProbingObject::Repr ? "repr" : "kn";
}

ProbingObject probing_object_from_string(const std::string& name) {
  if (name == "repr") return ProbingObject::Repr;
  if (name == "kn") return ProbingObject::KnowledgeNeurons;
  throw ConfigError("unknown probing object '" + name + "'");
}

bool bitwise_equal(const ReprBundle& a, const ReprBundle& b) {
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           std::memcmp(x.data(), y.data(), sizeof(float) * static_cast<std::size_t>(x.size())) == 0;
  };
  return same(a.repr, b.repr) && same(a.ffn, b.ffn) && a.index == b.index && a.meta == b.meta;
}

void validate(const ReprBundle& b) {
  using K = BundleError::Kind;
  if (b.repr.rows() == 0) throw BundleError(K::Invalid, "bundle has no tokens");
  if (b.repr.cols() == 0 || b.ffn.cols() == 0) throw BundleError(K::Invalid, "bundle has a zero dimension");
  if (b.ffn.rows() != b.repr.cols()) {
    throw BundleError(K::Invalid, "ffn has " + std::to_string(b.ffn.rows()) + " rows but repr has " +
                                      std::to_string(b.repr.cols()) + " columns");
  }
  if (b.index.size() != b.n_tokens()) {
    throw BundleError(K::IndexMismatch, "index has " + std::to_string(b.index.size()) + " entries for " +
                                            std::to_string(b.n_tokens()) + " rows");
  }
  std::set<RowKey> seen;
  for (const auto& k : b.index) {
    if (k.token_index < 1) throw BundleError(K::IndexMismatch, "token index must be >= 1");
    if (!seen.insert(k).second) {
      throw BundleError(K::IndexMismatch,
                        "duplicate index entry (" + k.sentence_id + ", " + std::to_string(k.token_index) + ")");
    }
  }
  if (!all_finite(b.repr) || !all_finite(b.ffn)) throw BundleError(K::NonFinite, "bundle contains NaN or Inf");
}

std::vector<std::byte> encode_bundle(const ReprBundle& b) {
  validate(b);
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(b.n_tokens()));
  w.u32(static_cast<std::uint32_t>(b.d()));
  w.u32(static_cast<std::uint32_t>(b.h()));
  w.floats(b.repr.data(), static_cast<std::size_t>(b.repr.size()));
  w.floats(b.ffn.data(), static_cast<std::size_t>(b.ffn.size()));
  const auto meta = meta_to_json(b).dump();
  w.u64(meta.size());
  w.raw(meta.data(), meta.size());
  return w.take();
}

ReprBundle decode_bundle(std::span<const std::byte> bytes) {
  using K = BundleError::Kind;
  ByteReader r(bytes);
  const auto magic = r.raw(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw BundleError(K::BadMagic, "not a KTB1 bundle");
  const auto version = r.u32("version");
  if (version != kBundleVersion) {
    throw BundleError(K::BadVersion, "unsupported bundle version " + std::to_string(version));
  }
  const auto n = r.u32("n_tokens");
  const auto d = r.u32("d");
  const auto h = r.u32("h");

  ReprBundle b;
  b.repr.resize(n, d);
  r.floats(b.repr.data(), static_cast<std::size_t>(n) * d, "repr payload");
  b.ffn.resize(d, h);
  r.floats(b.ffn.data(), static_cast<std::size_t>(d) * h, "ffn payload");
  const auto meta_len = r.u64("metadata length");
  const auto meta_bytes = r.raw(meta_len, "metadata");
  if (r.remaining() != 0) {
    throw BundleError(K::TrailingBytes, std::to_string(r.remaining()) + " trailing bytes after metadata");
  }

  json meta;
  try {
    meta = json::parse(std::string_view(reinterpret_cast<const char*>(meta_bytes.data()), meta_bytes.size()));
    b.meta.model = meta.at("model").get<std::string>();
    b.meta.repr_layer = meta.at("repr_layer").get<int>();
    b.meta.ffn_layer = meta.at("ffn_layer").get<int>();
    for (const auto& entry : meta.at("index")) {
      if (!entry.is_array() || entry.size() != 2) throw BundleError(K::Metadata, "index entries must be pairs");
      b.index.push_back({entry[0].get<std::string>(), entry[1].get<int>()});
    }
    for (const auto& [key, value] : meta.items()) {
      if (key != "model" && key != "repr_layer" && key != "ffn_layer" && key != "index") {
        b.meta.extra[key] = value.dump();
      }
    }
  } catch (const json::exception& e) {
    throw BundleError(K::Metadata, std::string("bad bundle metadata: ") + e.what());
  }
  validate(b);
  return b;
}

ReprBundle load_bundle(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_bundle(bytes);
  } catch (const BundleError& e) {
    throw BundleError(e.kind(), path.string() + ": " + e.what());
  }
}

void write_bundle(const ReprBundle& bundle, const std::filesystem::path& path) {
  atomic_write(path, encode_bundle(bundle));
}

std::string fingerprint(const ReprBundle& b) {
  Sha256 h;
  h.update(std::span<const std::byte>(encode_bundle(b)));
  return h.hex_digest();
}

Matrix project_knowledge_neurons(const ReprBundle& b) {
  const MatrixD ffn = b.ffn.cast<double>();
  Matrix out(b.repr.rows(), b.ffn.cols());
  for (Eigen::Index start = 0; start < b.repr.rows(); start += kProjectionChunk) {
    const auto rows = std::min<Eigen::Index>(kProjectionChunk, b.repr.rows() - start);
    const MatrixD block = b.repr.middleRows(start, rows).cast<double>();
    out.middleRows(start, rows) = (block * ffn).cast<float>();
  }
  return out;
}

Matrix feature_view(const ReprBundle& b, ProbingObject kind) {
  return kind == ProbingObject::Repr ? b.repr : project_knowledge_neurons(b);
}

std::filesystem::path projection_cache_path(const std::filesystem::path& bundle_path) {
  auto p = bundle_path;
  p += ".kn";
  return p;
}

Matrix load_or_project(const ReprBundle& b, const std::filesystem::path& bundle_path) {
  const auto cache = projection_cache_path(bundle_path);
  const auto source = fingerprint(b);
  if (std::filesystem::exists(cache)) {
    try {
      const auto bytes = read_file(cache);
      ByteReader r(bytes);
      const auto magic = r.raw(4, "magic");
      if (std::memcmp(magic.data(), kProjectionMagic, 4) == 0 && r.u32("version") == kProjectionVersion) {
        const auto hash = r.raw(64, "source fingerprint");
        const auto rows = r.u32("rows");
        const auto cols = r.u32("cols");
        if (std::memcmp(hash.data(), source.data(), 64) == 0 && rows == b.n_tokens() && cols == b.h()) {
          Matrix m(rows, cols);
          r.floats(m.data(), static_cast<std::size_t>(m.size()), "projection payload");
          if (r.remaining() == 0) return m;
        }
      }
    } catch (const BundleError&) {
      // stale or damaged cache; recompute below
    }
  }
  Matrix kn = project_knowledge_neurons(b);
  ByteWriter w;
  w.raw(kProjectionMagic, 4);
  w.u32(kProjectionVersion);
  w.raw(source.data(), source.size());
  w.u32(static_cast<std::uint32_t>(kn.rows()));
  w.u32(static_cast<std::uint32_t>(kn.cols()));
  w.floats(kn.data(), static_cast<std::size_t>(kn.size()));
  atomic_write(cache, w.take());
  return kn;
}

void atomic_write(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw BundleError(BundleError::Kind::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw BundleError(BundleError::Kind::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void atomic_write(const std::filesystem::path& path, const std::string& text) {
  atomic_write(path, std::as_bytes(std::span(text.data(), text.size())));
}

}  // namespace ktrees::repr
