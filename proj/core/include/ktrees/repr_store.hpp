#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ktrees/error.hpp"
#include "ktrees/matrix.hpp"

namespace ktrees::repr {

/// The two things a probing classifier can look at.
enum class ProbingObject { Repr, KnowledgeNeurons };

const char* to_string(ProbingObject kind);
ProbingObject probing_object_from_string(const std::string& name);

struct RowKey {
  std::string sentence_id;
  int token_index = 0;

  auto operator<=>(const RowKey&) const = default;
};

struct BundleMeta {
  std::string model;
  int repr_layer = 5;
  int ffn_layer = 4;
  /// Other metadata keys, each holding its JSON-serialised value verbatim.
  std::map<std::string, std::string> extra;

  bool operator==(const BundleMeta&) const = default;
};

/// Token representations from one transformer layer plus the FFN matrix of
/// another, with one index entry per representation row.
struct ReprBundle {
  Matrix repr;  // n_tokens x d
  Matrix ffn;   // d x h
  std::vector<RowKey> index;
  BundleMeta meta;

  std::size_t n_tokens() const { return static_cast<std::size_t>(repr.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(repr.cols()); }
  std::size_t h() const { return static_cast<std::size_t>(ffn.cols()); }
};

/// Bit-exact equality, including the sign of zeros.
bool bitwise_equal(const ReprBundle& a, const ReprBundle& b);

class BundleError : public DataError {
 public:
  enum class Kind { Io, BadMagic, BadVersion, Truncated, NonFinite, IndexMismatch, TrailingBytes, Metadata, Invalid };
  BundleError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kBundleVersion = 1;

/// Throws BundleError(Invalid/NonFinite/IndexMismatch) when a bundle breaks an invariant.
void validate(const ReprBundle& bundle);

std::vector<std::byte> encode_bundle(const ReprBundle& bundle);
ReprBundle decode_bundle(std::span<const std::byte> bytes);

ReprBundle load_bundle(const std::filesystem::path& path);
void write_bundle(const ReprBundle& bundle, const std::filesystem::path& path);

/// Content hash over payloads and metadata.
std::string fingerprint(const ReprBundle& bundle);

/// repr * ffn with no bias and no activation. Accumulates in double,
/// stores float.
Matrix project_knowledge_neurons(const ReprBundle& bundle);

Matrix feature_view(const ReprBundle& bundle, ProbingObject kind);

/// Knowledge-neuron matrix cached next to the bundle as "<bundle>.kn".
/// Recomputed when missing or when it was produced from different content.
Matrix load_or_project(const ReprBundle& bundle, const std::filesystem::path& bundle_path);
std::filesystem::path projection_cache_path(const std::filesystem::path& bundle_path);

/// Write bytes to a sibling temp file and rename over the target.
void atomic_write(const std::filesystem::path& path, std::span<const std::byte> bytes);
void atomic_write(const std::filesystem::path& path, const std::string& text);

}  // namespace ktrees::repr
