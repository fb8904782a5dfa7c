#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drgrade/error.hpp"

namespace drgrade {

// Row-major raster with interleaved channels and a top-left origin. The Tag
// parameter keeps semantically different rasters (an RGB photo, a binary
// mask) from converting into each other silently.
template <typename T, std::size_t Channels, typename Tag>
class Raster {
 public:
  using value_type = T;
  static constexpr std::size_t kChannels = Channels;

  Raster() = default;

  Raster(std::uint32_t width, std::uint32_t height, T fill = T{})
      : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(pixel_count() * Channels, fill);
  }

  Raster(std::uint32_t width, std::uint32_t height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    require(data_.size() == pixel_count() * Channels, ErrorKind::kDimensionMismatch,
            "raster data length " + std::to_string(data_.size()) + " does not match " +
                std::to_string(width) + "x" + std::to_string(height) + "x" +
                std::to_string(Channels));
  }

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool empty() const noexcept { return data_.empty(); }

  T& at(std::size_t x, std::size_t y, std::size_t c = 0) noexcept {
    return data_[(y * width_ + x) * Channels + c];
  }
  const T& at(std::size_t x, std::size_t y, std::size_t c = 0) const noexcept {
    return data_[(y * width_ + x) * Channels + c];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool same_shape(std::uint32_t w, std::uint32_t h) const noexcept {
    return width_ == w && height_ == h;
  }
  template <typename U, std::size_t C2, typename Tag2>
  bool same_shape(const Raster<U, C2, Tag2>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static void check_dims(std::uint32_t width, std::uint32_t height) {
    require(width > 0 && height > 0, ErrorKind::kInvalidArgument,
            "raster dimensions must be positive, got " + std::to_string(width) + "x" +
                std::to_string(height));
  }

  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<T> data_;
};

struct RgbTag {};
struct GrayTag {};
struct PlaneTag {};
struct BinaryTag {};

using RgbImage = Raster<std::uint8_t, 3, RgbTag>;
using GrayImage = Raster<std::uint8_t, 1, GrayTag>;
// Real-valued single-channel working plane.
using Plane = Raster<double, 1, PlaneTag>;
// 0 = background, 1 = foreground.
using BinaryMask = Raster<std::uint8_t, 1, BinaryTag>;

// Per-pixel lesion probability. Values are validated into [0, 1] on
// construction and the mask is read-only afterwards.
class ProbMask {
 public:
  ProbMask() = default;
  ProbMask(std::uint32_t width, std::uint32_t height, std::vector<float> values);

  std::uint32_t width() const noexcept { return raster_.width(); }
  std::uint32_t height() const noexcept { return raster_.height(); }
  std::size_t pixel_count() const noexcept { return raster_.pixel_count(); }
  float at(std::size_t x, std::size_t y) const noexcept { return raster_.at(x, y); }
  std::span<const float> data() const noexcept { return raster_.data(); }

  friend bool operator==(const ProbMask&, const ProbMask&) = default;

 private:
  struct Tag {};
  Raster<float, 1, Tag> raster_;
};

inline ProbMask::ProbMask(std::uint32_t width, std::uint32_t height,
                          std::vector<float> values)
    : raster_(width, height, std::move(values)) {
  const auto data = raster_.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float v = data[i];
    // NaN fails both comparisons.
    if (!(v >= 0.0f && v <= 1.0f)) {
      fail(ErrorKind::kOutOfRange, "probability value " + std::to_string(v) +
                                       " outside [0,1] at index " + std::to_string(i));
    }
  }
}

inline std::size_t count_foreground(const BinaryMask& mask) noexcept {
  std::size_t n = 0;
  for (auto v : mask.data()) n += v != 0;
  return n;
}

}  // namespace drgrade
