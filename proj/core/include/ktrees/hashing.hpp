#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace ktrees {

/// Incremental SHA-256 (backed by OpenSSL). Used for dataset fingerprints
/// and cache keys, which must be stable across platforms.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::byte> bytes);
  Sha256& update(std::string_view text);
  /// Length-prefixed string, so concatenations stay unambiguous.
  Sha256& field(std::string_view text);
  Sha256& field(std::uint64_t value);

  template <typename T>
  Sha256& pod(std::span<const T> values) {
    return update(std::as_bytes(values));
  }

  std::array<std::uint8_t, 32> digest();
  std::string hex_digest();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view text);

/// Derive a child seed from a parent seed and a label (splitmix over a hash).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

}  // namespace ktrees
