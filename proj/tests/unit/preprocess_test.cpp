#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "drgrade/preprocess.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace drgrade {
namespace {

using test::expect_error;
using test::oracle_correlate;

double max_abs_diff(const Plane& a, const Plane& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

Kernel random_kernel(Rng& rng, int w, int h) {
  std::vector<double> v(static_cast<std::size_t>(w * h));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Kernel(w, h, v);
}

double channel_std(const RgbImage& img, std::size_t c) {
  double s = 0.0, s2 = 0.0;
  const double n = static_cast<double>(img.pixel_count());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      s += img.at(x, y, c);
      s2 += img.at(x, y, c) * img.at(x, y, c);
    }
  }
  return std::sqrt(s2 / n - (s / n) * (s / n));
}

TEST(Convolve, IdentityKernelIsExact) {
  Rng rng(1);
  const Plane f = test::random_plane(rng, 16, 16);
  const Kernel id(3, 3, {0, 0, 0, 0, 1, 0, 0, 0, 0});
  EXPECT_EQ(convolve2d(f, id), f);
}

TEST(Convolve, MatchesDoubleLoopOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Plane f = test::random_plane(rng, 16, 16);
    const int kw = 1 + 2 * static_cast<int>(rng.below(4));
    const int kh = 1 + 2 * static_cast<int>(rng.below(4));
    const Kernel k = random_kernel(rng, kw, kh);
    EXPECT_LE(max_abs_diff(convolve2d(f, k), oracle_correlate(f, k)), 1e-12);
  }
}

TEST(Convolve, ImpulseReproducesKernelInCorrelationOrientation) {
  Rng rng(3);
  const Kernel k = random_kernel(rng, 5, 3);
  Plane f(15, 15);
  f.at(7, 7) = 1.0;
  const Plane g = convolve2d(f, k);
  // Correlation: g(7-i, 7-j) = k(i, j).
  for (int j = -1; j <= 1; ++j) {
    for (int i = -2; i <= 2; ++i) EXPECT_NEAR(g.at(7 - i, 7 - j), k.at(i, j), 1e-12);
  }
}

TEST(Convolve, ConstantInputNormalizedKernel) {
  Plane f(12, 9, 37.25);
  const Kernel k = gaussian_kernel({1.3, 0.7, 0.4, -0.2, 3, 2});
  const Plane g = convolve2d(f, k);
  for (double v : g.data()) EXPECT_NEAR(v, 37.25, 1e-9);
}

TEST(Convolve, Linearity) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Plane f = test::random_plane(rng, 16, 16);
    const Plane g = test::random_plane(rng, 16, 16);
    const Kernel k = random_kernel(rng, 5, 5);
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    Plane combo(16, 16);
    for (std::size_t i = 0; i < combo.data().size(); ++i) combo.data()[i] = a * f.data()[i] + b * g.data()[i];
    const Plane lhs = convolve2d(combo, k);
    const Plane cf = convolve2d(f, k), cg = convolve2d(g, k);
    for (std::size_t i = 0; i < lhs.data().size(); ++i) {
      EXPECT_NEAR(lhs.data()[i], a * cf.data()[i] + b * cg.data()[i], 1e-9);
    }
  }
}

TEST(Convolve, EvenKernelRejected) {
  expect_error(ErrorKind::kInvalidArgument, [] { Kernel(2, 3, std::vector<double>(6, 0.0)); });
  expect_error(ErrorKind::kInvalidArgument, [] { Kernel(3, 4, std::vector<double>(12, 0.0)); });
}

TEST(GaussianKernel, SymmetricWithCentreMaximum) {
  const Kernel k = gaussian_kernel({1.0, 1.0, 0.0, 0.0, 1, 1});
  for (int j = -1; j <= 1; ++j) {
    for (int i = -1; i <= 1; ++i) {
      EXPECT_LE(k.at(i, j), k.at(0, 0));
      EXPECT_DOUBLE_EQ(k.at(i, j), k.at(-i, j));
      EXPECT_DOUBLE_EQ(k.at(i, j), k.at(i, -j));
    }
  }
}

TEST(GaussianKernel, NormalizedForRandomParameters) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    GaussianParams p{rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                     static_cast<int>(rng.below(6)), static_cast<int>(rng.below(6))};
    const Kernel k = gaussian_kernel(p);
    EXPECT_EQ(k.width(), 2 * p.radius_a + 1);
    EXPECT_EQ(k.height(), 2 * p.radius_b + 1);
    double sum = 0.0;
    for (double v : k.values()) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(GaussianKernel, CentreToCornerRatioBeforeNormalization) {
  const Kernel k = gaussian_kernel_unnormalized({1.0, 1.0, 0.0, 0.0, 3, 3});
  EXPECT_NEAR(k.at(0, 0) / k.at(3, 3), std::exp(9.0), 1e-6);
  EXPECT_NEAR(k.at(0, 0) / k.at(-3, -3), std::exp(9.0), 1e-6);
}

TEST(GaussianKernel, NonPositiveSigmaRejected) {
  expect_error(ErrorKind::kInvalidArgument, [] { gaussian_kernel({0.0, 1.0, 0, 0, 3, 3}); });
  expect_error(ErrorKind::kInvalidArgument, [] { gaussian_kernel({1.0, -2.0, 0, 0, 3, 3}); });
}

TEST(GaussianFilter, ConstantImageUnchanged) {
  RgbImage img(20, 20);
  for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = static_cast<std::uint8_t>(40 + 50 * (i % 3));
  const RgbImage out = gaussian_filter(img, {});
  for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_LE(std::abs(out.data()[i] - img.data()[i]), 1);
}

TEST(GaussianFilter, SaltAndPepperVarianceDrops) {
  Rng rng(6);
  RgbImage img(64, 64, 128);
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) {
      if (rng.uniform() < 0.05) {
        const std::uint8_t v = rng.uniform() < 0.5 ? 0 : 255;
        for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = v;
      }
    }
  }
  const RgbImage out = gaussian_filter(img, {});
  for (std::size_t c = 0; c < 3; ++c) EXPECT_LT(channel_std(out, c), channel_std(img, c));
}

TEST(GaussianFilter, LargeSigmaCollapsesCheckerboardRange) {
  RgbImage img(32, 32);
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t x = 0; x < 32; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = ((x + y) % 2) ? 255 : 0;
    }
  }
  const RgbImage out = gaussian_filter(img, {8.0, 8.0, 0.0, 0.0, 6, 6});
  // Edge replication breaks the alternation near the border.
  int lo = 255, hi = 0;
  for (std::size_t y = 6; y < 26; ++y) {
    for (std::size_t x = 6; x < 26; ++x) {
      lo = std::min<int>(lo, out.at(x, y, 0));
      hi = std::max<int>(hi, out.at(x, y, 0));
    }
  }
  EXPECT_LT(hi - lo, 40);
  EXPECT_NEAR((hi + lo) / 2.0, 127.5, 20.0);
}

TEST(Clahe, ConstantImageStaysConstant) {
  const RgbImage img(64, 48, 90);
  const RgbImage out = clahe_rgb(img);
  const auto [lo, hi] = std::minmax_element(out.data().begin(), out.data().end());
  EXPECT_LE(*hi - *lo, 1);
}

TEST(Clahe, LowContrastRampWidens) {
  RgbImage img(64, 64);
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(100 + (40 * x) / 63);
    }
  }
  const RgbImage out = clahe_rgb(img);
  const auto [ilo, ihi] = std::minmax_element(img.data().begin(), img.data().end());
  const auto [olo, ohi] = std::minmax_element(out.data().begin(), out.data().end());
  EXPECT_GT(static_cast<double>(*ohi - *olo) / (*ihi - *ilo), 1.0);
}

TEST(Clahe, DeterministicAndShapePreserving) {
  Rng rng(7);
  const RgbImage img = test::random_rgb(rng, 50, 37);
  const RgbImage a = clahe_rgb(img, 2.0, 8);
  EXPECT_EQ(a, clahe_rgb(img, 2.0, 8));
  EXPECT_TRUE(a.same_shape(img));
}

TEST(Clahe, DegenerateArguments) {
  const RgbImage img(4, 4);
  expect_error(ErrorKind::kInvalidArgument, [&] { clahe_rgb(img, 2.0, 5); });
  expect_error(ErrorKind::kInvalidArgument, [&] { clahe_rgb(img, 0.0, 2); });
  expect_error(ErrorKind::kInvalidArgument, [&] { clahe_rgb(img, 2.0, 0); });
}

RgbImage textured(Rng& rng, std::uint32_t w, std::uint32_t h, std::array<double, 3> mean, double spread) {
  RgbImage img(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(mean[c] + rng.normal(0, spread)), 0L, 255L));
      }
    }
  }
  return img;
}

TEST(ColorNormalize, FixedPointWhenStatsMatch) {
  Rng rng(8);
  const RgbImage img = textured(rng, 40, 40, {120, 80, 60}, 12);
  const BinaryMask all(40, 40, 1);
  const RgbImage out = color_normalize(img, color_stats(img, all), all);
  for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_LE(std::abs(out.data()[i] - img.data()[i]), 1);
}

TEST(ColorNormalize, ShiftsMeanToReference) {
  Rng rng(9);
  const RgbImage img = textured(rng, 60, 60, {50, 90, 70}, 10);
  const BinaryMask all(60, 60, 1);
  const ColorStats ref{{120, 100, 40}, {15, 20, 8}};
  const ColorStats after = color_stats(color_normalize(img, ref, all), all);
  EXPECT_GE(after.mean[0], 119.0);
  EXPECT_LE(after.mean[0], 121.0);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(after.mean[c], ref.mean[c], 1.0);
}

TEST(ColorNormalize, OnlyFundusPixelsCount) {
  Rng rng(10);
  RgbImage img = textured(rng, 40, 40, {100, 60, 30}, 10);
  BinaryMask fundus(40, 40, 1);
  for (std::size_t x = 0; x < 40; ++x) {
    for (std::size_t c = 0; c < 3; ++c) img.at(x, 0, c) = 0;
    fundus.at(x, 0) = 0;
  }
  const ColorStats ref{{140, 70, 50}, {10, 10, 10}};
  const ColorStats after = color_stats(color_normalize(img, ref, fundus), fundus);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(after.mean[c], ref.mean[c], 1.0);
}

TEST(ColorNormalize, BackgroundIsLeftUntouched) {
  Rng rng(12);
  RgbImage img = textured(rng, 40, 40, {100, 60, 30}, 10);
  BinaryMask fundus(40, 40, 1);
  for (std::size_t y = 0; y < 40; ++y) {
    for (std::size_t x = 0; x < 6; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = 0;
      fundus.at(x, y) = 0;
    }
  }
  const RgbImage out = color_normalize(img, {{140, 70, 50}, {10, 10, 10}}, fundus);
  for (std::size_t y = 0; y < 40; ++y) {
    for (std::size_t x = 0; x < 6; ++x) {
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(x, y, c), 0);
    }
  }
  EXPECT_EQ(fundus_mask(out), fundus_mask(img));
}

TEST(ColorNormalize, ConstantChannelIsZeroVariance) {
  Rng rng(11);
  RgbImage img = textured(rng, 10, 10, {100, 100, 100}, 10);
  for (std::size_t y = 0; y < 10; ++y) {
    for (std::size_t x = 0; x < 10; ++x) img.at(x, y, 1) = 77;
  }
  expect_error(ErrorKind::kZeroVariance,
               [&] { color_normalize(img, {{1, 1, 1}, {1, 1, 1}}, BinaryMask(10, 10, 1)); });
  expect_error(ErrorKind::kInvalidArgument,
               [&] { color_normalize(img, {{1, 1, 1}, {1, 0, 1}}, BinaryMask(10, 10, 1)); });
}

std::set<std::pair<long, long>> oracle_dilation(const BinaryMask& m, int r) {
  std::set<std::pair<long, long>> src, out;
  for (long y = 0; y < m.height(); ++y) {
    for (long x = 0; x < m.width(); ++x) {
      if (m.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) src.insert({x, y});
    }
  }
  for (long y = 0; y < m.height(); ++y) {
    for (long x = 0; x < m.width(); ++x) {
      for (const auto& [sx, sy] : src) {
        if ((x - sx) * (x - sx) + (y - sy) * (y - sy) <= static_cast<long>(r) * r) {
          out.insert({x, y});
          break;
        }
      }
    }
  }
  return out;
}

TEST(RemoveRegion, EmptyAndFullMasks) {
  Rng rng(12);
  const RgbImage img = test::random_rgb(rng, 20, 15);
  EXPECT_EQ(remove_region(img, BinaryMask(20, 15), 3), img);
  const RgbImage black = remove_region(img, BinaryMask(20, 15, 1), 0);
  for (auto v : black.data()) EXPECT_EQ(v, 0);
}

TEST(RemoveRegion, ZeroesExactlyTheDilatedDisc) {
  Rng rng(13);
  RgbImage img(30, 30);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(1 + rng.below(255));
  BinaryMask disc(30, 30);
  for (long y = 0; y < 30; ++y) {
    for (long x = 0; x < 30; ++x) {
      if ((x - 12) * (x - 12) + (y - 14) * (y - 14) <= 25) disc.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = 1;
    }
  }
  const auto expected = oracle_dilation(disc, 2);
  const RgbImage out = remove_region(img, disc, 2);
  std::size_t zeroed = 0;
  for (long y = 0; y < 30; ++y) {
    for (long x = 0; x < 30; ++x) {
      const auto ux = static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
      const bool z = out.at(ux, uy, 0) == 0 && out.at(ux, uy, 1) == 0 && out.at(ux, uy, 2) == 0;
      zeroed += z;
      EXPECT_EQ(z, expected.count({x, y}) == 1) << x << "," << y;
      if (!z) {
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(ux, uy, c), img.at(ux, uy, c));
      }
    }
  }
  EXPECT_EQ(zeroed, expected.size());
}

TEST(Dilate, MatchesSetOracleOnRandomMasks) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMask m = test::random_mask(rng, 18, 13, 0.05);
    const int r = static_cast<int>(rng.below(4));
    const BinaryMask d = dilate(m, r);
    const auto expected = oracle_dilation(m, r);
    for (long y = 0; y < 13; ++y) {
      for (long x = 0; x < 18; ++x) {
        EXPECT_EQ(d.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) != 0, expected.count({x, y}) == 1);
      }
    }
  }
}

TEST(RemoveVessels, EmptyMaskIsIdentity) {
  Rng rng(15);
  const RgbImage img = test::random_rgb(rng, 16, 16);
  EXPECT_EQ(remove_vessels(img, BinaryMask(16, 16), 5), img);
}

TEST(RemoveVessels, SinglePixelInConstantField) {
  RgbImage img(9, 9, 60);
  img.at(4, 4, 0) = 250;
  img.at(4, 4, 1) = 3;
  BinaryMask v(9, 9);
  v.at(4, 4) = 1;
  const RgbImage out = remove_vessels(img, v, 3);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(4, 4, c), 60);
}

// Lower median of the non-vessel pixels in the (clipped) window, found by a
// direct scan.
std::uint8_t oracle_inpaint(const RgbImage& img, const BinaryMask& v, long x, long y, long half, std::size_t c) {
  std::vector<int> vals;
  for (long yy = y - half; yy <= y + half; ++yy) {
    for (long xx = x - half; xx <= x + half; ++xx) {
      if (xx < 0 || yy < 0 || xx >= img.width() || yy >= img.height()) continue;
      if (v.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy))) continue;
      vals.push_back(img.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy), c));
    }
  }
  std::sort(vals.begin(), vals.end());
  return static_cast<std::uint8_t>(vals[(vals.size() - 1) / 2]);
}

TEST(RemoveVessels, VerticalLineThroughGradientMatchesScan) {
  RgbImage img(24, 16);
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 24; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>(10 * x);
      img.at(x, y, 1) = static_cast<std::uint8_t>(240 - 9 * x);
      img.at(x, y, 2) = static_cast<std::uint8_t>(5 * x + 3);
    }
  }
  BinaryMask v(24, 16);
  for (std::size_t y = 0; y < 16; ++y) v.at(11, y) = 1;
  const RgbImage out = remove_vessels(img, v, 5);
  for (long y = 0; y < 16; ++y) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(11, static_cast<std::size_t>(y), c), oracle_inpaint(img, v, 11, y, 2, c));
  }
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 24; ++x) {
      if (x == 11) continue;
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(x, y, c), img.at(x, y, c));
    }
  }
}

TEST(RemoveVessels, WindowGrowsUntilASampleIsFound) {
  RgbImage img(21, 21, 33);
  BinaryMask v(21, 21);
  for (std::size_t y = 5; y <= 15; ++y) {
    for (std::size_t x = 5; x <= 15; ++x) {
      v.at(x, y) = 1;
      img.at(x, y, 0) = 200;
    }
  }
  const RgbImage out = remove_vessels(img, v, 3);
  EXPECT_EQ(out.at(10, 10, 0), 33);
}

TEST(RemoveVessels, DimensionMismatch) {
  expect_error(ErrorKind::kDimensionMismatch, [] { remove_vessels(RgbImage(4, 4), BinaryMask(5, 4), 3); });
  expect_error(ErrorKind::kDimensionMismatch, [] { remove_region(RgbImage(4, 4), BinaryMask(4, 5), 0); });
}

TEST(MedianFilter, MatchesNeighbourhoodScan) {
  Rng rng(16);
  GrayImage g(13, 11);
  for (auto& v : g.data()) v = static_cast<std::uint8_t>(rng.below(256));
  const GrayImage out = median_filter(g, 5);
  for (long y = 0; y < 11; ++y) {
    for (long x = 0; x < 13; ++x) {
      std::vector<int> vals;
      for (long dy = -2; dy <= 2; ++dy) {
        for (long dx = -2; dx <= 2; ++dx) {
          vals.push_back(g.at(static_cast<std::size_t>(std::clamp(x + dx, 0L, 12L)),
                              static_cast<std::size_t>(std::clamp(y + dy, 0L, 10L))));
        }
      }
      std::sort(vals.begin(), vals.end());
      EXPECT_EQ(out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)), vals[12]);
    }
  }
}

TEST(FundusMask, ThresholdsMaxChannelAfterMedian) {
  RgbImage img(40, 40);
  for (long y = 0; y < 40; ++y) {
    for (long x = 0; x < 40; ++x) {
      if ((x - 20) * (x - 20) + (y - 20) * (y - 20) <= 144) {
        img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), 2) = 30;  // only blue is lit
      }
    }
  }
  img.at(2, 2, 0) = 255;  // isolated speck removed by the median
  const BinaryMask m = fundus_mask(img);
  EXPECT_EQ(m.at(20, 20), 1);
  EXPECT_EQ(m.at(2, 2), 0);
  EXPECT_EQ(m.at(0, 39), 0);
}

TEST(PreprocessChain, Deterministic) {
  Rng rng(17);
  RgbImage img = test::random_rgb(rng, 48, 48);
  BinaryMask disc(48, 48), vessels(48, 48);
  for (std::size_t i = 10; i < 14; ++i) disc.at(i, i) = 1;
  for (std::size_t y = 0; y < 48; ++y) vessels.at(30, y) = 1;
  PreprocessParams p;
  p.color_reference = ColorStats{{120, 60, 30}, {20, 15, 10}};
  const RgbImage a = preprocess_chain(img, p, &disc, &vessels);
  const RgbImage b = preprocess_chain(img, p, &disc, &vessels);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.at(12, 12, 0), 0);
}

}  // namespace
}  // namespace drgrade
