#include <bit>
#include <cstring>
#include <fstream>

#include <gtest/gtest.h>

#include "drgrade/imgio.hpp"
#include "support.hpp"

namespace drgrade {
namespace {

using test::expect_error;
using test::TempDir;

void write_raw(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::vector<std::byte> pfmap_bytes(std::uint32_t w, std::uint32_t h, const std::vector<float>& values,
                                   std::uint32_t reserved = 0) {
  std::vector<std::byte> out;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  };
  for (char c : {'P', 'F', 'M', '1'}) out.push_back(static_cast<std::byte>(c));
  u32(w);
  u32(h);
  u32(reserved);
  for (float v : values) u32(std::bit_cast<std::uint32_t>(v));
  return out;
}

TEST(Imgio, DecodesTwoPixelPpm) {
  TempDir dir;
  write_raw(dir / "a.ppm", std::string("P6\n2 1\n255\n") + std::string("\xFF\x00\x00\x00\x00\xFF", 6));
  const RgbImage img = load_rgb(dir / "a.ppm");
  EXPECT_EQ(img.width(), 2u);
  EXPECT_EQ(img.height(), 1u);
  EXPECT_EQ(img.values(), (std::vector<std::uint8_t>{255, 0, 0, 0, 0, 255}));
}

TEST(Imgio, PpmHeaderCommentsAreSkipped) {
  TempDir dir;
  write_raw(dir / "c.ppm", std::string("P6 # comment\n1 1\n# more\n255\n") + std::string("\x01\x02\x03", 3));
  EXPECT_EQ(load_rgb(dir / "c.ppm").values(), (std::vector<std::uint8_t>{1, 2, 3}));
}

TEST(Imgio, EmptyFileIsMalformedHeader) {
  TempDir dir;
  write_raw(dir / "empty.png", "");
  expect_error(ErrorKind::kMalformedHeader, [&] { load_rgb(dir / "empty.png"); });
}

TEST(Imgio, MissingFileNamesThePath) {
  TempDir dir;
  const auto msg = test::error_message([&] { load_rgb(dir / "nope.png"); });
  EXPECT_NE(msg.find("nope.png"), std::string::npos);
  expect_error(ErrorKind::kMissingFile, [&] { load_rgb(dir / "nope.png"); });
}

TEST(Imgio, TruncatedPpmIsTruncatedData) {
  TempDir dir;
  write_raw(dir / "t.ppm", std::string("P6\n2 2\n255\n") + std::string("\x01\x02\x03\x04", 4));
  expect_error(ErrorKind::kTruncatedData, [&] { load_rgb(dir / "t.ppm"); });
}

TEST(Imgio, TruncatedPngIsTruncatedData) {
  TempDir dir;
  Rng rng(3);
  save_rgb(test::random_rgb(rng, 32, 32), dir / "full.png");
  auto bytes = read_file_bytes(dir / "full.png");
  bytes.resize(bytes.size() / 2);
  write_file_bytes(dir / "half.png", bytes);
  expect_error(ErrorKind::kTruncatedData, [&] { load_rgb(dir / "half.png"); });
}

TEST(Imgio, GarbageIsMalformedHeader) {
  TempDir dir;
  write_raw(dir / "g.png", "hello world");
  expect_error(ErrorKind::kMalformedHeader, [&] { load_rgb(dir / "g.png"); });
}

TEST(Imgio, RgbRoundTripPngAndPpm) {
  TempDir dir;
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = static_cast<std::uint32_t>(1 + rng.below(40));
    const auto h = static_cast<std::uint32_t>(1 + rng.below(40));
    const RgbImage img = test::random_rgb(rng, w, h);
    save_rgb(img, dir / "x.png");
    save_rgb(img, dir / "x.ppm");
    EXPECT_EQ(load_rgb(dir / "x.png"), img);
    EXPECT_EQ(load_rgb(dir / "x.ppm"), img);
  }
}

TEST(Imgio, OneBlackPixelPpmPayloadIsThreeZeroBytes) {
  TempDir dir;
  save_rgb(RgbImage(1, 1), dir / "b.ppm");
  const auto bytes = read_file_bytes(dir / "b.ppm");
  ASSERT_GE(bytes.size(), 3u);
  for (std::size_t i = bytes.size() - 3; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], std::byte{0});
  EXPECT_EQ(load_rgb(dir / "b.ppm").values(), (std::vector<std::uint8_t>{0, 0, 0}));
}

TEST(Imgio, ZeroWidthImageIsRejected) {
  expect_error(ErrorKind::kInvalidArgument, [] { RgbImage(0, 4); });
}

TEST(Imgio, GrayAndMaskRoundTrip) {
  TempDir dir;
  Rng rng(5);
  GrayImage g(17, 9);
  for (auto& v : g.data()) v = static_cast<std::uint8_t>(rng.below(256));
  save_gray(g, dir / "g.png");
  EXPECT_EQ(load_gray(dir / "g.png"), g);

  const BinaryMask m = test::random_mask(rng, 23, 7, 0.3);
  save_binary_mask(m, dir / "m.png");
  EXPECT_EQ(load_binary_mask(dir / "m.png"), m);
  // On disk the foreground is 255.
  EXPECT_EQ(load_gray(dir / "m.png").values()[0], m.values()[0] ? 255 : 0);
}

TEST(Imgio, PfmapAllHalf) {
  const ProbMask p = decode_pfmap(pfmap_bytes(2, 2, {0.5f, 0.5f, 0.5f, 0.5f}));
  EXPECT_EQ(p.width(), 2u);
  for (float v : p.data()) EXPECT_EQ(v, 0.5f);
}

TEST(Imgio, PfmapOutOfRangeReportsIndex) {
  const auto bytes = pfmap_bytes(2, 1, {1.5f, 0.0f});
  expect_error(ErrorKind::kOutOfRange, [&] { decode_pfmap(bytes); });
  EXPECT_NE(test::error_message([&] { decode_pfmap(bytes); }).find("index 0"), std::string::npos);
  const auto later = pfmap_bytes(3, 1, {0.0f, 0.2f, std::numeric_limits<float>::quiet_NaN()});
  EXPECT_NE(test::error_message([&] { decode_pfmap(later); }).find("index 2"), std::string::npos);
}

TEST(Imgio, PfmapHeaderErrors) {
  auto bad_magic = pfmap_bytes(1, 1, {0.0f});
  bad_magic[3] = std::byte{'2'};
  expect_error(ErrorKind::kMalformedHeader, [&] { decode_pfmap(bad_magic); });
  expect_error(ErrorKind::kMalformedHeader, [&] { decode_pfmap(pfmap_bytes(1, 1, {0.0f}, 7)); });
  expect_error(ErrorKind::kOutOfRange, [&] { decode_pfmap(pfmap_bytes(0x10000, 0x10001, {})); });
  expect_error(ErrorKind::kTruncatedData, [&] { decode_pfmap(pfmap_bytes(2, 2, {0.0f, 0.0f})); });
}

TEST(Imgio, PfmapZeros4x4Layout) {
  TempDir dir;
  save_probmask(ProbMask(4, 4, std::vector<float>(16, 0.0f)), dir / "z.pfmap");
  const auto bytes = read_file_bytes(dir / "z.pfmap");
  ASSERT_EQ(bytes.size(), kPfmapHeaderSize + 64);
  EXPECT_EQ(std::memcmp(bytes.data(), "PFM1", 4), 0);
  EXPECT_EQ(bytes[4], std::byte{4});
  EXPECT_EQ(bytes[8], std::byte{4});
  for (std::size_t i = 12; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], std::byte{0});
}

TEST(Imgio, PfmapRoundTripIsBitExact) {
  TempDir dir;
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = static_cast<std::uint32_t>(1 + rng.below(30));
    const auto h = static_cast<std::uint32_t>(1 + rng.below(30));
    std::vector<float> v(static_cast<std::size_t>(w) * h);
    for (auto& x : v) x = static_cast<float>(rng.uniform());
    v[0] = 1.0f;
    v.back() = std::nextafter(0.0f, 1.0f);  // denormal survives too
    const ProbMask p(w, h, v);
    save_probmask(p, dir / "p.pfmap");
    const ProbMask q = load_probmask(dir / "p.pfmap");
    ASSERT_EQ(q.pixel_count(), p.pixel_count());
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint32_t>(q.data()[i]), std::bit_cast<std::uint32_t>(v[i]));
    }
  }
}

TEST(Imgio, SaveToUnwritablePathIsIoError) {
  const ProbMask p(1, 1, {0.0f});
  expect_error(ErrorKind::kIo, [&] { save_probmask(p, "/proc/definitely/not/here.pfmap"); });
}

TEST(Imgio, ToGrayExamples) {
  RgbImage img(3, 1, std::vector<std::uint8_t>{255, 255, 255, 0, 0, 0, 255, 0, 0});
  EXPECT_EQ(to_gray(img).values(), (std::vector<std::uint8_t>{255, 0, 76}));
}

TEST(Imgio, ToGrayIdempotentThroughGrayEmbedding) {
  GrayImage g(256, 1);
  for (std::size_t i = 0; i < 256; ++i) g.at(i, 0) = static_cast<std::uint8_t>(i);
  EXPECT_EQ(to_gray(gray_to_rgb(g)), g);
}

TEST(Imgio, AtomicWriteLeavesNoTemporary) {
  TempDir dir;
  save_rgb(RgbImage(2, 2), dir / "a.png");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++n;
  EXPECT_EQ(n, 1u);
}

}  // namespace
}  // namespace drgrade
