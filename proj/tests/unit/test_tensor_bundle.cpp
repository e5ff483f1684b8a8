#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mgst/errors.hpp"
#include "mgst/tensor_bundle.hpp"

namespace mgst {
namespace {

TensorBundle random_bundle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  TensorBundle b;
  for (int i = 0; i < 5; ++i) {
    Tensor t;
    for (int r = 0; r <= i % 4; ++r) t.dims.push_back(1 + static_cast<std::uint32_t>(rng() % 5));
    t.values.resize(t.element_count());
    for (float& v : t.values) v = u(rng);
    b.set("layer" + std::to_string(i) + ".w", std::move(t));
  }
  b.set("scalar", Tensor{{}, {3.25f}});
  b.set("empty", Tensor{{0, 3}, {}});
  return b;
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TEST(TensorBundle, SaveLoadRoundTrip) {
  testing::TempDir dir("bundle");
  const TensorBundle b = random_bundle(1);
  save_bundle(dir.path() / "w.bin", b);
  EXPECT_EQ(load_bundle(dir.path() / "w.bin"), b);
}

TEST(TensorBundle, HeaderLayout) {
  TensorBundle b;
  b.set("ab", Tensor{{2}, {1.0f, -1.0f}});
  const auto bytes = serialize(b);
  const std::vector<std::uint8_t> expected{
      'M', 'G', 'S', 'T', 1, 0, 0, 0, 1, 0, 0, 0,  // magic, version, count
      2, 0, 0, 0, 'a', 'b',                        // name
      1, 0, 0, 0, 2, 0, 0, 0,                      // rank, dims
      0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x80, 0xbf};
  EXPECT_EQ(bytes, expected);
}

TEST(TensorBundle, EveryTruncationIsFormatError) {
  const auto bytes = serialize(random_bundle(2));
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(n));
    EXPECT_THROW(deserialize(cut), FormatError) << "length " << n;
  }
}

TEST(TensorBundle, TruncatedFileReturnsNothing) {
  testing::TempDir dir("bundle");
  auto bytes = serialize(random_bundle(3));
  bytes.resize(bytes.size() - 3);
  write_bytes(dir.path() / "w.bin", bytes);
  EXPECT_THROW(load_bundle(dir.path() / "w.bin"), FormatError);
}

TEST(TensorBundle, BadMagicAndVersion) {
  auto bytes = serialize(random_bundle(4));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  try {
    deserialize(bad_version);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(TensorBundle, TrailingBytesRejected) {
  auto bytes = serialize(random_bundle(5));
  bytes.push_back(0);
  EXPECT_THROW(deserialize(bytes), FormatError);
}

TEST(TensorBundle, MismatchedExpectedShapeNamesTensor) {
  testing::TempDir dir("bundle");
  TensorBundle b;
  b.set("enc0.conv.w", Tensor{{2, 3}, std::vector<float>(6, 0.5f)});
  save_bundle(dir.path() / "w.bin", b);
  try {
    load_bundle(dir.path() / "w.bin", std::map<std::string, std::vector<std::uint32_t>>{{"enc0.conv.w", {3, 2}}});
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.tensor(), "enc0.conv.w");
    EXPECT_NE(std::string(e.what()).find("enc0.conv.w"), std::string::npos);
  }
  EXPECT_THROW(load_bundle(dir.path() / "w.bin", std::map<std::string, std::vector<std::uint32_t>>{{"nope", {1}}}),
               ConfigError);
}

TEST(TensorBundle, SetValidatesElementCount) {
  TensorBundle b;
  EXPECT_THROW(b.set("x", Tensor{{2, 2}, {1.0f}}), ShapeError);
}

TEST(TensorBundle, MissingFileIsIoError) {
  EXPECT_THROW(load_bundle("/nonexistent/dir/w.bin"), IoError);
}

}  // namespace
}  // namespace mgst
