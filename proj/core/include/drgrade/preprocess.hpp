#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "drgrade/image.hpp"

namespace drgrade {

struct GaussianParams {
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double mu_x = 0.0;
  double mu_y = 0.0;
  int radius_a = 3;  // half-width: i runs over [-a, a]
  int radius_b = 3;  // half-height: j runs over [-b, b]
};

struct ColorStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
};

struct ClaheParams {
  double clip_limit = 2.0;
  int tile_grid = 8;
};

// Correlation kernel k(i, j) with i in [-half_width, half_width] (x offset)
// and j in [-half_height, half_height] (y offset).
class Kernel {
 public:
  // width/height are the full extents and must both be odd.
  Kernel(int width, int height, std::vector<double> values);

  int half_width() const noexcept { return width_ / 2; }
  int half_height() const noexcept { return height_ / 2; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  double at(int i, int j) const noexcept {
    return values_[static_cast<std::size_t>((j + half_height()) * width_ + (i + half_width()))];
  }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  int width_;
  int height_;
  std::vector<double> values_;
};

Kernel gaussian_kernel(const GaussianParams& params);
// Same exponential without the final normalisation.
Kernel gaussian_kernel_unnormalized(const GaussianParams& params);

// g(x, y) = sum_i sum_j f(x + i, y + j) * k(i, j), edge-replicated borders.
Plane convolve2d(const Plane& image, const Kernel& kernel);

RgbImage gaussian_filter(const RgbImage& img, const GaussianParams& params);

RgbImage clahe_rgb(const RgbImage& img, double clip_limit = 2.0, int tile_grid = 8);

// Fundus field: max-channel plane, 5x5 median, then > threshold.
BinaryMask fundus_mask(const RgbImage& img, int threshold = 10);

ColorStats color_stats(const RgbImage& img, const BinaryMask& region);

RgbImage color_normalize(const RgbImage& img, const ColorStats& reference,
                         const BinaryMask& fundus);

// Morphological dilation with a disc of the given radius (Euclidean).
BinaryMask dilate(const BinaryMask& mask, int radius);

RgbImage remove_region(const RgbImage& img, const BinaryMask& region, int dilate_px);

RgbImage remove_vessels(const RgbImage& img, const BinaryMask& vessels, int window = 5);

GrayImage median_filter(const GrayImage& img, int window);

struct PreprocessParams {
  ClaheParams clahe;
  std::optional<ColorStats> color_reference;  // normalisation skipped when absent
  GaussianParams gaussian;
  int disc_dilate_px = 4;
  int vessel_window = 5;
};

// clahe -> colour normalisation -> gaussian -> disc removal -> vessel removal.
RgbImage preprocess_chain(const RgbImage& img, const PreprocessParams& params,
                          const BinaryMask* disc = nullptr, const BinaryMask* vessels = nullptr);

}  // namespace drgrade
