#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "json.hpp"
#include "ktrees/repr_store.hpp"
#include "test_support.hpp"

using namespace ktrees;
using namespace ktrees::repr;

namespace {

ReprBundle small_bundle() {
  ReprBundle b;
  b.repr.resize(3, 4);
  b.ffn.resize(4, 2);
  for (Eigen::Index i = 0; i < 12; ++i) b.repr.data()[i] = static_cast<float>(i) + 0.5f;
  for (Eigen::Index i = 0; i < 8; ++i) b.ffn.data()[i] = -static_cast<float>(i) * 0.25f;
  b.repr(1, 2) = -0.0f;
  b.index = {{"s1", 1}, {"s1", 2}, {"s2", 1}};
  b.meta.model = "tiny";
  b.meta.extra["pooling"] = "\"first\"";
  return b;
}

template <typename T>
T read_le(const std::vector<std::byte>& bytes, std::size_t offset) {
  T v{};
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;  // the test host is little-endian, asserted below
}

BundleError::Kind decode_kind(const std::vector<std::byte>& bytes) {
  try {
    decode_bundle(bytes);
  } catch (const BundleError& e) {
    return e.kind();
  }
  FAIL("decode should have failed");
  return BundleError::Kind::Invalid;
}

}  // namespace

TEST_CASE("3-token d=4 h=2 bundle byte layout") {
  static_assert(std::endian::native == std::endian::little);
  const auto b = small_bundle();
  const auto bytes = encode_bundle(b);
  CHECK(std::memcmp(bytes.data(), "KTB1", 4) == 0);
  CHECK(read_le<std::uint32_t>(bytes, 4) == 1);
  CHECK(read_le<std::uint32_t>(bytes, 8) == 3);
  CHECK(read_le<std::uint32_t>(bytes, 12) == 4);
  CHECK(read_le<std::uint32_t>(bytes, 16) == 2);
  for (std::size_t i = 0; i < 12; ++i)
    CHECK(std::bit_cast<std::uint32_t>(read_le<float>(bytes, 20 + 4 * i)) ==
          std::bit_cast<std::uint32_t>(b.repr.data()[i]));
  for (std::size_t i = 0; i < 8; ++i) CHECK(read_le<float>(bytes, 68 + 4 * i) == b.ffn.data()[i]);
  const auto len = read_le<std::uint64_t>(bytes, 100);
  REQUIRE(bytes.size() == 108 + len);
  const std::string text(reinterpret_cast<const char*>(bytes.data()) + 108, len);
  const auto meta = nlohmann::json::parse(text);
  CHECK(meta.at("model") == "tiny");
  CHECK(meta.at("repr_layer") == 5);
  CHECK(meta.at("ffn_layer") == 4);
  CHECK(meta.at("index") == nlohmann::json::parse(R"([["s1",1],["s1",2],["s2",1]])"));
  CHECK(meta.at("pooling") == "first");
}

TEST_CASE("write then load is bit exact, negative zero included") {
  const auto dir = testing::scratch_dir("bundle-roundtrip");
  const auto b = small_bundle();
  write_bundle(b, dir / "b.ktb");
  const auto back = load_bundle(dir / "b.ktb");
  CHECK(bitwise_equal(b, back));
  CHECK(std::signbit(back.repr(1, 2)));
  CHECK(back.meta == b.meta);
}

TEST_CASE("load errors are distinct") {
  using K = BundleError::Kind;
  const auto good = encode_bundle(small_bundle());

  auto bad_magic = good;
  bad_magic[0] = std::byte{'X'};
  CHECK(decode_kind(bad_magic) == K::BadMagic);

  auto bad_version = good;
  bad_version[4] = std::byte{2};
  CHECK(decode_kind(bad_version) == K::BadVersion);

  CHECK(decode_kind(std::vector<std::byte>(good.begin(), good.begin() + 50)) == K::Truncated);

  auto trailing = good;
  trailing.push_back(std::byte{0});
  CHECK(decode_kind(trailing) == K::TrailingBytes);

  auto nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 24, &q, 4);
  CHECK(decode_kind(nan) == K::NonFinite);

  auto b = small_bundle();
  b.index.pop_back();
  CHECK_THROWS_AS(validate(b), BundleError);
  try {
    validate(b);
  } catch (const BundleError& e) {
    CHECK(e.kind() == K::IndexMismatch);
  }
  auto dup = small_bundle();
  dup.index[2] = dup.index[0];
  CHECK_THROWS_AS(validate(dup), BundleError);

  ReprBundle empty;
  empty.ffn.resize(4, 2);
  empty.repr.resize(0, 4);
  CHECK_THROWS_AS(encode_bundle(empty), BundleError);
}

TEST_CASE("projection matches a triple loop") {
  std::mt19937_64 rng(11);
  ReprBundle b;
  b.repr = testing::random_matrix(rng, 3, 4);
  b.ffn = testing::random_matrix(rng, 4, 2);
  b.index = {{"a", 1}, {"a", 2}, {"a", 3}};
  const auto kn = project_knowledge_neurons(b);
  REQUIRE(kn.rows() == 3);
  REQUIRE(kn.cols() == 2);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += static_cast<double>(b.repr(i, k)) * b.ffn(k, j);
      CHECK(kn(i, j) == static_cast<float>(s));
    }
  }
}

TEST_CASE("projection with identity and basis rows") {
  std::mt19937_64 rng(5);
  ReprBundle b;
  b.repr = testing::random_matrix(rng, 6, 5);
  b.ffn = Matrix::Identity(5, 5);
  for (int i = 0; i < 6; ++i) b.index.push_back({"s", i + 1});
  CHECK(project_knowledge_neurons(b) == b.repr);
  CHECK(feature_view(b, ProbingObject::Repr) == feature_view(b, ProbingObject::KnowledgeNeurons));

  b.ffn = testing::random_matrix(rng, 5, 7);
  b.repr.setZero();
  b.repr(2, 3) = 1.0f;
  const auto kn = project_knowledge_neurons(b);
  CHECK(kn.row(2) == b.ffn.row(3));
  CHECK(feature_view(b, ProbingObject::Repr) == b.repr);
}

TEST_CASE("projection is linear") {
  std::mt19937_64 rng(9);
  ReprBundle b;
  b.repr = testing::random_matrix(rng, 3, 8);
  b.ffn = testing::random_matrix(rng, 8, 6);
  b.repr.row(2) = 1.5f * b.repr.row(0) - 0.75f * b.repr.row(1);
  b.index = {{"s", 1}, {"s", 2}, {"s", 3}};
  const auto kn = project_knowledge_neurons(b);
  for (int j = 0; j < 6; ++j) {
    const double want = 1.5 * kn(0, j) - 0.75 * kn(1, j);
    CHECK(std::abs(kn(2, j) - want) <= 1e-4 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("knowledge-neuron cache is reused and refreshed") {
  const auto dir = testing::scratch_dir("kn-cache");
  auto b = small_bundle();
  write_bundle(b, dir / "b.ktb");
  const auto first = load_or_project(b, dir / "b.ktb");
  REQUIRE(std::filesystem::exists(projection_cache_path(dir / "b.ktb")));
  CHECK(load_or_project(b, dir / "b.ktb") == first);
  b.ffn(0, 0) += 1.0f;
  write_bundle(b, dir / "b.ktb");
  CHECK(load_or_project(b, dir / "b.ktb") == project_knowledge_neurons(b));
}
