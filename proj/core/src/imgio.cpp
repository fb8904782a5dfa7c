#include "drgrade/imgio.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace drgrade {
namespace fs = std::filesystem;

namespace {

std::string quoted(const fs::path& path) { return "'" + path.string() + "'"; }

bool has_png_magic(std::span<const std::byte> bytes) {
  static constexpr unsigned char kMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kMagic, 8) == 0;
}

bool is_ppm_path(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".ppm";
}

// Decodes any PNG into the requested libpng simplified format.
std::vector<std::uint8_t> decode_png(std::span<const std::byte> bytes, std::uint32_t format,
                                     std::uint32_t& width, std::uint32_t& height,
                                     const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    const std::string msg = image.message;
    png_image_free(&image);
    fail(ErrorKind::kMalformedHeader, "malformed PNG header in " + quoted(path) + ": " + msg);
  }
  image.format = format;
  width = image.width;
  height = image.height;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    fail(ErrorKind::kTruncatedData, "truncated PNG pixel data in " + quoted(path) + ": " + msg);
  }
  png_image_free(&image);
  return pixels;
}

std::vector<std::byte> encode_png(std::span<const std::uint8_t> pixels, std::uint32_t width,
                                  std::uint32_t height, std::uint32_t format,
                                  const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = width;
  image.height = height;
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, pixels.data(), 0, nullptr)) {
    fail(ErrorKind::kIo, "PNG encoding failed for " + quoted(path) + ": " + image.message);
  }
  std::vector<std::byte> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    fail(ErrorKind::kIo, "PNG encoding failed for " + quoted(path) + ": " + image.message);
  }
  out.resize(size);
  return out;
}

class PpmReader {
 public:
  PpmReader(std::span<const std::byte> bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  RgbImage read() {
    if (bytes_.size() < 2 || static_cast<char>(bytes_[0]) != 'P' ||
        static_cast<char>(bytes_[1]) != '6') {
      fail(ErrorKind::kMalformedHeader, "not a PNG or P6 PPM file: " + quoted(path_));
    }
    pos_ = 2;
    const std::uint64_t width = header_number();
    const std::uint64_t height = header_number();
    const std::uint64_t maxval = header_number();
    if (width == 0 || height == 0 || width > 0xFFFFFFu || height > 0xFFFFFFu) {
      fail(ErrorKind::kMalformedHeader, "invalid PPM dimensions in " + quoted(path_));
    }
    if (maxval == 0 || maxval > 255) {
      fail(ErrorKind::kMalformedHeader, "unsupported PPM maxval " + std::to_string(maxval) +
                                            " in " + quoted(path_));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) {
      fail(ErrorKind::kMalformedHeader, "missing raster separator in " + quoted(path_));
    }
    ++pos_;
    const std::size_t payload = static_cast<std::size_t>(width * height * 3);
    if (bytes_.size() - pos_ < payload) {
      fail(ErrorKind::kTruncatedData, "truncated PPM pixel data in " + quoted(path_) + ": expected " +
                                          std::to_string(payload) + " bytes, found " +
                                          std::to_string(bytes_.size() - pos_));
    }
    std::vector<std::uint8_t> data(payload);
    std::memcpy(data.data(), bytes_.data() + pos_, payload);
    return RgbImage(static_cast<std::uint32_t>(width), static_cast<std::uint32_t>(height),
                    std::move(data));
  }

 private:
  static bool is_space(std::byte b) {
    const char c = static_cast<char>(b);
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (static_cast<char>(bytes_[pos_]) == '#') {
        while (pos_ < bytes_.size() && static_cast<char>(bytes_[pos_]) != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::uint64_t header_number() {
    skip_space_and_comments();
    std::uint64_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size()) {
      const char c = static_cast<char>(bytes_[pos_]);
      if (c < '0' || c > '9') break;
      value = value * 10 + static_cast<std::uint64_t>(c - '0');
      if (++digits > 9) fail(ErrorKind::kMalformedHeader, "PPM header number overflow in " + quoted(path_));
      ++pos_;
    }
    if (digits == 0) fail(ErrorKind::kMalformedHeader, "malformed PPM header in " + quoted(path_));
    return value;
  }

  std::span<const std::byte> bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

void put_u32_le(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32_le(std::span<const std::byte> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(std::to_integer<std::uint8_t>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::vector<std::byte> read_file_bytes(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    fail(ErrorKind::kMissingFile, "no such file: " + quoted(path));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + quoted(path));
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) fail(ErrorKind::kIo, "read failed for " + quoted(path));
  return bytes;
}

void write_file_bytes(const fs::path& path, std::span<const std::byte> bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot open " + quoted(path) + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::kIo, "write failed for " + quoted(path));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::kIo, "cannot move temporary into " + quoted(path));
  }
}

RgbImage load_rgb(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.empty()) fail(ErrorKind::kMalformedHeader, "empty image file: " + quoted(path));
  if (has_png_magic(bytes)) {
    std::uint32_t w = 0, h = 0;
    auto pixels = decode_png(bytes, PNG_FORMAT_RGB, w, h, path);
    return RgbImage(w, h, std::move(pixels));
  }
  return PpmReader(bytes, path).read();
}

void save_rgb(const RgbImage& img, const fs::path& path) {
  require(!img.empty(), ErrorKind::kInvalidArgument, "cannot save an empty image to " + quoted(path));
  if (is_ppm_path(path)) {
    const std::string header =
        "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::byte> out(header.size() + img.data().size());
    std::memcpy(out.data(), header.data(), header.size());
    std::memcpy(out.data() + header.size(), img.data().data(), img.data().size());
    write_file_bytes(path, out);
    return;
  }
  write_file_bytes(path, encode_png(img.data(), img.width(), img.height(), PNG_FORMAT_RGB, path));
}

GrayImage load_gray(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.empty()) fail(ErrorKind::kMalformedHeader, "empty image file: " + quoted(path));
  if (has_png_magic(bytes)) {
    std::uint32_t w = 0, h = 0;
    auto pixels = decode_png(bytes, PNG_FORMAT_GRAY, w, h, path);
    return GrayImage(w, h, std::move(pixels));
  }
  return to_gray(PpmReader(bytes, path).read());
}

void save_gray(const GrayImage& img, const fs::path& path) {
  require(!img.empty(), ErrorKind::kInvalidArgument, "cannot save an empty image to " + quoted(path));
  write_file_bytes(path, encode_png(img.data(), img.width(), img.height(), PNG_FORMAT_GRAY, path));
}

BinaryMask load_binary_mask(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  if (!has_png_magic(bytes)) fail(ErrorKind::kMalformedHeader, "binary mask is not a PNG: " + quoted(path));
  std::uint32_t w = 0, h = 0;
  // Read as RGB so colour-coded masks (any non-zero channel) load too.
  const auto pixels = decode_png(bytes, PNG_FORMAT_RGB, w, h, path);
  BinaryMask mask(w, h);
  auto out = mask.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (pixels[3 * i] | pixels[3 * i + 1] | pixels[3 * i + 2]) != 0 ? 1 : 0;
  }
  return mask;
}

void save_binary_mask(const BinaryMask& mask, const fs::path& path) {
  require(!mask.empty(), ErrorKind::kInvalidArgument, "cannot save an empty mask to " + quoted(path));
  std::vector<std::uint8_t> pixels(mask.pixel_count());
  std::transform(mask.data().begin(), mask.data().end(), pixels.begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
  write_file_bytes(path, encode_png(pixels, mask.width(), mask.height(), PNG_FORMAT_GRAY, path));
}

std::vector<std::byte> encode_pfmap(const ProbMask& mask) {
  std::vector<std::byte> out;
  out.reserve(kPfmapHeaderSize + mask.pixel_count() * 4);
  for (char c : {'P', 'F', 'M', '1'}) out.push_back(static_cast<std::byte>(c));
  put_u32_le(out, mask.width());
  put_u32_le(out, mask.height());
  put_u32_le(out, 0);
  for (float v : mask.data()) put_u32_le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

ProbMask decode_pfmap(std::span<const std::byte> bytes, const std::string& origin) {
  if (bytes.size() < kPfmapHeaderSize || std::memcmp(bytes.data(), "PFM1", 4) != 0) {
    fail(ErrorKind::kMalformedHeader, "bad PFMAP magic in '" + origin + "'");
  }
  const std::uint32_t width = get_u32_le(bytes, 4);
  const std::uint32_t height = get_u32_le(bytes, 8);
  if (width == 0 || height == 0) {
    fail(ErrorKind::kMalformedHeader, "zero PFMAP dimension in '" + origin + "'");
  }
  if (get_u32_le(bytes, 12) != 0) {
    fail(ErrorKind::kMalformedHeader, "non-zero PFMAP reserved field in '" + origin + "'");
  }
  const std::uint64_t count = static_cast<std::uint64_t>(width) * height;
  if (count > (std::uint64_t{1} << 32)) {
    fail(ErrorKind::kOutOfRange, "PFMAP dimensions overflow in '" + origin + "'");
  }
  if (bytes.size() - kPfmapHeaderSize < count * 4) {
    fail(ErrorKind::kTruncatedData, "truncated PFMAP payload in '" + origin + "'");
  }
  std::vector<float> values(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32_le(bytes, kPfmapHeaderSize + 4 * i));
  }
  try {
    return ProbMask(width, height, std::move(values));
  } catch (const Error& e) {
    fail(e.kind(), std::string(e.what()) + " in '" + origin + "'");
  }
}

ProbMask load_probmask(const fs::path& path) {
  return decode_pfmap(read_file_bytes(path), path.string());
}

void save_probmask(const ProbMask& mask, const fs::path& path) {
  require(mask.pixel_count() > 0, ErrorKind::kInvalidArgument, "cannot save an empty mask to " + quoted(path));
  write_file_bytes(path, encode_pfmap(mask));
}

GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  const auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double luma = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(luma), 0L, 255L));
  }
  return out;
}

RgbImage gray_to_rgb(const GrayImage& img) {
  RgbImage out(img.width(), img.height());
  const auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
  }
  return out;
}

}  // namespace drgrade
