#include "drgrade/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace drgrade {

namespace {

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::size_t clamp_index(long v, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
}

Plane channel_plane(const RgbImage& img, std::size_t c) {
  Plane plane(img.width(), img.height());
  auto dst = plane.data();
  const auto src = img.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[3 * i + c];
  return plane;
}

void check_same_shape(const RgbImage& img, const BinaryMask& mask, const char* what) {
  require(img.same_shape(mask), ErrorKind::kDimensionMismatch,
          std::string(what) + " mask is " + std::to_string(mask.width()) + "x" +
              std::to_string(mask.height()) + " but image is " + std::to_string(img.width()) +
              "x" + std::to_string(img.height()));
}

Kernel build_gaussian(const GaussianParams& p, bool normalize) {
  require(p.sigma_x > 0.0 && p.sigma_y > 0.0, ErrorKind::kInvalidArgument,
          "gaussian sigma must be positive");
  require(p.radius_a >= 0 && p.radius_b >= 0, ErrorKind::kInvalidArgument,
          "gaussian radii must be non-negative");
  const int width = 2 * p.radius_a + 1;
  const int height = 2 * p.radius_b + 1;
  std::vector<double> values(static_cast<std::size_t>(width) * height);
  for (int j = -p.radius_b; j <= p.radius_b; ++j) {
    for (int i = -p.radius_a; i <= p.radius_a; ++i) {
      const double dx = i - p.mu_x;
      const double dy = j - p.mu_y;
      values[static_cast<std::size_t>((j + p.radius_b) * width + (i + p.radius_a))] =
          std::exp(-(dx * dx / (2.0 * p.sigma_x * p.sigma_x) + dy * dy / (2.0 * p.sigma_y * p.sigma_y)));
    }
  }
  if (normalize) {
    const double sum = std::accumulate(values.begin(), values.end(), 0.0);
    require(sum > 0.0 && std::isfinite(sum), ErrorKind::kInvalidArgument,
            "gaussian kernel underflowed; mu lies too far outside the support");
    for (auto& v : values) v /= sum;
  }
  return Kernel(width, height, std::move(values));
}

// Contrast-limited equalisation LUT for one tile histogram.
std::array<std::uint8_t, 256> clipped_lut(std::array<std::uint32_t, 256> hist, std::size_t area,
                                          double clip_limit) {
  const auto clip = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(clip_limit * static_cast<double>(area) / 256.0));
  std::uint32_t excess = 0;
  for (auto& h : hist) {
    if (h > clip) {
      excess += h - clip;
      h = clip;
    }
  }
  const std::uint32_t share = excess / 256;
  std::uint32_t residual = excess % 256;
  for (auto& h : hist) h += share;
  if (residual > 0) {
    const std::uint32_t step = std::max<std::uint32_t>(256 / residual, 1);
    for (std::uint32_t i = 0; i < 256 && residual > 0; i += step, --residual) ++hist[i];
  }
  std::array<std::uint8_t, 256> lut{};
  const double scale = 255.0 / static_cast<double>(area);
  std::uint64_t cdf = 0;
  for (std::size_t v = 0; v < 256; ++v) {
    cdf += hist[v];
    lut[v] = to_u8(static_cast<double>(cdf) * scale);
  }
  return lut;
}

struct TileAxis {
  std::vector<std::size_t> start;  // g + 1 boundaries
  std::vector<double> center;
};

TileAxis tile_axis(std::size_t extent, int grid) {
  TileAxis axis;
  const auto g = static_cast<std::size_t>(grid);
  for (std::size_t t = 0; t <= g; ++t) axis.start.push_back(t * extent / g);
  for (std::size_t t = 0; t < g; ++t) {
    axis.center.push_back((static_cast<double>(axis.start[t]) + static_cast<double>(axis.start[t + 1]) - 1.0) / 2.0);
  }
  return axis;
}

// Neighbouring tiles and the weight of the second one for coordinate v.
void interpolation_cell(const TileAxis& axis, double v, std::size_t& t1, std::size_t& t2, double& w) {
  const std::size_t g = axis.center.size();
  if (v <= axis.center.front()) {
    t1 = t2 = 0;
    w = 0.0;
    return;
  }
  if (v >= axis.center.back()) {
    t1 = t2 = g - 1;
    w = 0.0;
    return;
  }
  t1 = 0;
  while (t1 + 1 < g && axis.center[t1 + 1] <= v) ++t1;
  t2 = t1 + 1;
  w = (v - axis.center[t1]) / (axis.center[t2] - axis.center[t1]);
}

std::uint8_t lower_median(std::vector<std::uint8_t>& values) {
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

}  // namespace

Kernel::Kernel(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  require(width > 0 && height > 0 && width % 2 == 1 && height % 2 == 1, ErrorKind::kInvalidArgument,
          "kernel dimensions must be odd, got " + std::to_string(width) + "x" + std::to_string(height));
  require(values_.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
          ErrorKind::kDimensionMismatch, "kernel value count does not match its dimensions");
}

Kernel gaussian_kernel(const GaussianParams& params) { return build_gaussian(params, true); }

Kernel gaussian_kernel_unnormalized(const GaussianParams& params) {
  return build_gaussian(params, false);
}

Plane convolve2d(const Plane& image, const Kernel& kernel) {
  const std::size_t w = image.width();
  const std::size_t h = image.height();
  const int a = kernel.half_width();
  const int b = kernel.half_height();
  Plane out(image.width(), image.height());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -b; j <= b; ++j) {
        const std::size_t yy = clamp_index(static_cast<long>(y) + j, h);
        for (int i = -a; i <= a; ++i) {
          const std::size_t xx = clamp_index(static_cast<long>(x) + i, w);
          acc += image.at(xx, yy) * kernel.at(i, j);
        }
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

RgbImage gaussian_filter(const RgbImage& img, const GaussianParams& params) {
  const Kernel kernel = gaussian_kernel(params);
  RgbImage out(img.width(), img.height());
  for (std::size_t c = 0; c < 3; ++c) {
    const Plane filtered = convolve2d(channel_plane(img, c), kernel);
    const auto src = filtered.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[3 * i + c] = to_u8(src[i]);
  }
  return out;
}

RgbImage clahe_rgb(const RgbImage& img, double clip_limit, int tile_grid) {
  require(clip_limit > 0.0, ErrorKind::kInvalidArgument, "CLAHE clip limit must be positive");
  require(tile_grid >= 1 && static_cast<std::uint32_t>(tile_grid) <= std::min(img.width(), img.height()),
          ErrorKind::kInvalidArgument,
          "CLAHE tile grid " + std::to_string(tile_grid) + " does not fit a " +
              std::to_string(img.width()) + "x" + std::to_string(img.height()) + " image");
  const auto g = static_cast<std::size_t>(tile_grid);
  const TileAxis xs = tile_axis(img.width(), tile_grid);
  const TileAxis ys = tile_axis(img.height(), tile_grid);

  RgbImage out(img.width(), img.height());
  std::vector<std::array<std::uint8_t, 256>> luts(g * g);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t ty = 0; ty < g; ++ty) {
      for (std::size_t tx = 0; tx < g; ++tx) {
        std::array<std::uint32_t, 256> hist{};
        for (std::size_t y = ys.start[ty]; y < ys.start[ty + 1]; ++y) {
          for (std::size_t x = xs.start[tx]; x < xs.start[tx + 1]; ++x) ++hist[img.at(x, y, c)];
        }
        const std::size_t area = (xs.start[tx + 1] - xs.start[tx]) * (ys.start[ty + 1] - ys.start[ty]);
        luts[ty * g + tx] = clipped_lut(hist, area, clip_limit);
      }
    }
    for (std::size_t y = 0; y < img.height(); ++y) {
      std::size_t ty1 = 0, ty2 = 0;
      double wy = 0.0;
      interpolation_cell(ys, static_cast<double>(y), ty1, ty2, wy);
      for (std::size_t x = 0; x < img.width(); ++x) {
        std::size_t tx1 = 0, tx2 = 0;
        double wx = 0.0;
        interpolation_cell(xs, static_cast<double>(x), tx1, tx2, wx);
        const std::uint8_t v = img.at(x, y, c);
        const double top = (1.0 - wx) * luts[ty1 * g + tx1][v] + wx * luts[ty1 * g + tx2][v];
        const double bottom = (1.0 - wx) * luts[ty2 * g + tx1][v] + wx * luts[ty2 * g + tx2][v];
        out.at(x, y, c) = to_u8((1.0 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

GrayImage median_filter(const GrayImage& img, int window) {
  require(window >= 1 && window % 2 == 1, ErrorKind::kInvalidArgument, "median window must be odd");
  const int half = window / 2;
  GrayImage out(img.width(), img.height());
  std::vector<std::uint8_t> buf;
  buf.reserve(static_cast<std::size_t>(window * window));
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      buf.clear();
      for (int dy = -half; dy <= half; ++dy) {
        const std::size_t yy = clamp_index(static_cast<long>(y) + dy, img.height());
        for (int dx = -half; dx <= half; ++dx) {
          buf.push_back(img.at(clamp_index(static_cast<long>(x) + dx, img.width()), yy));
        }
      }
      out.at(x, y) = lower_median(buf);
    }
  }
  return out;
}

BinaryMask fundus_mask(const RgbImage& img, int threshold) {
  GrayImage max_channel(img.width(), img.height());
  const auto src = img.data();
  auto dst = max_channel.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = std::max({src[3 * i], src[3 * i + 1], src[3 * i + 2]});
  }
  const GrayImage smoothed = median_filter(max_channel, 5);
  BinaryMask mask(img.width(), img.height());
  auto out = mask.data();
  const auto sm = smoothed.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sm[i] > threshold ? 1 : 0;
  return mask;
}

ColorStats color_stats(const RgbImage& img, const BinaryMask& region) {
  check_same_shape(img, region, "statistics");
  const auto px = img.data();
  const auto m = region.data();
  std::array<double, 3> sum{}, sum_sq{};
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    ++n;
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = px[3 * i + c];
      sum[c] += v;
      sum_sq[c] += v * v;
    }
  }
  require(n > 0, ErrorKind::kEmptyInput, "colour statistics region is empty");
  ColorStats stats;
  for (std::size_t c = 0; c < 3; ++c) {
    stats.mean[c] = sum[c] / static_cast<double>(n);
    stats.stddev[c] = std::sqrt(std::max(0.0, sum_sq[c] / static_cast<double>(n) - stats.mean[c] * stats.mean[c]));
  }
  return stats;
}

RgbImage color_normalize(const RgbImage& img, const ColorStats& reference, const BinaryMask& fundus) {
  for (std::size_t c = 0; c < 3; ++c) {
    require(reference.stddev[c] > 0.0, ErrorKind::kInvalidArgument,
            "reference standard deviation must be positive on every channel");
  }
  const ColorStats stats = color_stats(img, fundus);
  static constexpr const char* kNames[3] = {"R", "G", "B"};
  for (std::size_t c = 0; c < 3; ++c) {
    require(stats.stddev[c] > 0.0, ErrorKind::kZeroVariance,
            std::string("channel ") + kNames[c] + " is constant over the fundus; cannot normalise");
  }
  // Pixels outside the fundus are copied unchanged so the background stays
  // black and later fundus masks see the same field.
  RgbImage out = img;
  const auto src = img.data();
  const auto m = fundus.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!m[i / 3]) continue;
    const std::size_t c = i % 3;
    dst[i] = to_u8((src[i] - stats.mean[c]) / stats.stddev[c] * reference.stddev[c] + reference.mean[c]);
  }
  return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  require(radius >= 0, ErrorKind::kInvalidArgument, "dilation radius must be non-negative");
  if (radius == 0) return mask;
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) offsets.emplace_back(dx, dy);
    }
  }
  const long w = mask.width();
  const long h = mask.height();
  BinaryMask out(mask.width(), mask.height());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      if (!mask.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) continue;
      for (const auto& [dx, dy] : offsets) {
        const long xx = x + dx;
        const long yy = y + dy;
        if (xx >= 0 && xx < w && yy >= 0 && yy < h) {
          out.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy)) = 1;
        }
      }
    }
  }
  return out;
}

RgbImage remove_region(const RgbImage& img, const BinaryMask& region, int dilate_px) {
  check_same_shape(img, region, "region");
  const BinaryMask grown = dilate(region, dilate_px);
  RgbImage out = img;
  auto dst = out.data();
  const auto m = grown.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = 0;
  }
  return out;
}

RgbImage remove_vessels(const RgbImage& img, const BinaryMask& vessels, int window) {
  check_same_shape(img, vessels, "vessel");
  require(window >= 3 && window % 2 == 1, ErrorKind::kInvalidArgument,
          "vessel inpainting window must be odd and >= 3");
  const long w = img.width();
  const long h = img.height();
  const long max_half = std::max(w, h);

  // Fallback: per-channel median over non-vessel fundus pixels.
  std::optional<std::array<std::uint8_t, 3>> fallback;
  auto fundus_fallback = [&]() {
    if (fallback) return *fallback;
    const BinaryMask fundus = fundus_mask(img);
    std::array<std::uint8_t, 3> med{};
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<std::uint8_t> pool, any;
      for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
          const auto ux = static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
          if (vessels.at(ux, uy)) continue;
          any.push_back(img.at(ux, uy, c));
          if (fundus.at(ux, uy)) pool.push_back(img.at(ux, uy, c));
        }
      }
      if (pool.empty()) pool = std::move(any);
      med[c] = pool.empty() ? 0 : lower_median(pool);
    }
    fallback = med;
    return med;
  };

  RgbImage out = img;
  std::array<std::vector<std::uint8_t>, 3> samples;
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      if (!vessels.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) continue;
      bool filled = false;
      for (long half = window / 2;; half *= 2) {
        for (auto& s : samples) s.clear();
        for (long yy = std::max(0L, y - half); yy <= std::min(h - 1, y + half); ++yy) {
          for (long xx = std::max(0L, x - half); xx <= std::min(w - 1, x + half); ++xx) {
            const auto ux = static_cast<std::size_t>(xx), uy = static_cast<std::size_t>(yy);
            if (vessels.at(ux, uy)) continue;
            for (std::size_t c = 0; c < 3; ++c) samples[c].push_back(img.at(ux, uy, c));
          }
        }
        if (!samples[0].empty()) {
          for (std::size_t c = 0; c < 3; ++c) {
            out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c) = lower_median(samples[c]);
          }
          filled = true;
          break;
        }
        if (half >= max_half) break;
      }
      if (!filled) {
        const auto med = fundus_fallback();
        for (std::size_t c = 0; c < 3; ++c) {
          out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c) = med[c];
        }
      }
    }
  }
  return out;
}

RgbImage preprocess_chain(const RgbImage& img, const PreprocessParams& params,
                          const BinaryMask* disc, const BinaryMask* vessels) {
  RgbImage out = clahe_rgb(img, params.clahe.clip_limit, params.clahe.tile_grid);
  if (params.color_reference) {
    out = color_normalize(out, *params.color_reference, fundus_mask(out));
  }
  out = gaussian_filter(out, params.gaussian);
  if (disc) out = remove_region(out, *disc, params.disc_dilate_px);
  if (vessels) out = remove_vessels(out, *vessels, params.vessel_window);
  return out;
}

}  // namespace drgrade
