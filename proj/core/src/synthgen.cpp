#include "drgrade/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "drgrade/error.hpp"
#include "drgrade/rng.hpp"

namespace drgrade {

namespace {

struct Rgb {
  double r, g, b;
};

constexpr Rgb kFieldColor{160.0, 72.0, 34.0};
constexpr Rgb kDiscColor{242.0, 222.0, 150.0};
constexpr Rgb kVesselColor{92.0, 26.0, 16.0};
constexpr int kPlacementAttempts = 4000;
constexpr int kLesionGap = 2;

Rgb lesion_color(LesionKind kind) {
  switch (kind) {
    case LesionKind::kMA: return {118.0, 24.0, 18.0};
    case LesionKind::kHEM: return {96.0, 14.0, 10.0};
    case LesionKind::kSE: return {216.0, 206.0, 178.0};
    case LesionKind::kHE: return {236.0, 214.0, 88.0};
  }
  return {0.0, 0.0, 0.0};
}

std::uint8_t channel(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void paint(RgbImage& img, std::size_t x, std::size_t y, const Rgb& c, Rng& rng, double jitter) {
  img.at(x, y, 0) = channel(c.r + rng.normal(0.0, jitter));
  img.at(x, y, 1) = channel(c.g + rng.normal(0.0, jitter));
  img.at(x, y, 2) = channel(c.b + rng.normal(0.0, jitter));
}

std::vector<std::pair<long, long>> disc_offsets(int r) {
  std::vector<std::pair<long, long>> out;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= r * r) out.emplace_back(dx, dy);
    }
  }
  return out;
}

bool inside(long x, long y, std::uint32_t w, std::uint32_t h) {
  return x >= 0 && y >= 0 && x < static_cast<long>(w) && y < static_cast<long>(h);
}

void mark_disc(BinaryMask& mask, long cx, long cy, int r) {
  for (const auto& [dx, dy] : disc_offsets(r)) {
    if (inside(cx + dx, cy + dy, mask.width(), mask.height())) {
      mask.at(static_cast<std::size_t>(cx + dx), static_cast<std::size_t>(cy + dy)) = 1;
    }
  }
}

}  // namespace

LesionSpec default_lesion_spec(LesionKind kind, std::array<std::size_t, 4> per_quadrant) {
  LesionSpec s;
  s.per_quadrant = per_quadrant;
  switch (kind) {
    case LesionKind::kMA: s.min_radius = 1; s.max_radius = 2; break;
    case LesionKind::kHEM: s.min_radius = 2; s.max_radius = 3; break;
    case LesionKind::kSE: s.min_radius = 3; s.max_radius = 5; break;
    case LesionKind::kHE: s.min_radius = 2; s.max_radius = 4; break;
  }
  return s;
}

SyntheticFundus gen_fundus(std::uint64_t seed, const FundusSpec& spec) {
  require(spec.width >= 128 && spec.height >= 128, ErrorKind::kInvalidArgument,
          "synthetic fundus needs at least 128x128 pixels");
  Rng rng(seed);
  const std::uint32_t w = spec.width, h = spec.height;
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  const double radius = 0.46 * std::min(w, h);

  SyntheticFundus out{RgbImage(w, h), {}, BinaryMask(w, h), BinaryMask(w, h), BinaryMask(w, h), {cx, cy}};
  for (auto k : kAllLesionKinds) out.lesions.emplace(k, BinaryMask(w, h));

  // Field with radial vignetting.
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double rr = std::hypot(x - cx, y - cy) / radius;
      if (rr > 1.0) continue;
      out.field.at(x, y) = 1;
      const double shade = 1.0 - 0.35 * rr * rr;
      paint(out.image, x, y, {kFieldColor.r * shade, kFieldColor.g * shade, kFieldColor.b * shade}, rng, 2.5);
    }
  }

  // Optic disc on the horizontal axis, right of centre.
  const double disc_x = cx + 0.45 * radius;
  const double disc_rx = 0.14 * radius, disc_ry = 0.16 * radius;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double ex = (x - disc_x) / disc_rx, ey = (y - cy) / disc_ry;
      if (ex * ex + ey * ey <= 1.0) out.disc.at(x, y) = 1;
    }
  }

  // Vessels: jittered polylines radiating from the disc.
  for (int b = 0; b < spec.vessel_branches; ++b) {
    double angle = 2.0 * std::numbers::pi * (b + rng.uniform(0.2, 0.8)) / std::max(1, spec.vessel_branches);
    double px = disc_x, py = cy;
    const int thickness = b % 2 == 0 ? 1 : 0;
    for (int step = 0; step < static_cast<int>(1.6 * radius); ++step) {
      angle += rng.normal(0.0, 0.08);
      px += std::cos(angle);
      py += std::sin(angle);
      if (std::hypot(px - cx, py - cy) > radius - 4.0) break;
      const long ix = std::lround(px), iy = std::lround(py);
      for (const auto& [dx, dy] : disc_offsets(thickness)) {
        const long vx = ix + dx, vy = iy + dy;
        if (!inside(vx, vy, w, h)) continue;
        const auto ux = static_cast<std::size_t>(vx), uy = static_cast<std::size_t>(vy);
        if (out.field.at(ux, uy) && !out.disc.at(ux, uy)) out.vessels.at(ux, uy) = 1;
      }
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (out.vessels.at(x, y)) paint(out.image, x, y, kVesselColor, rng, 2.0);
      if (out.disc.at(x, y)) paint(out.image, x, y, kDiscColor, rng, 2.0);
    }
  }

  // Lesions. `blocked` keeps every blob at least kLesionGap pixels away from
  // other blobs, the disc and the vessels.
  BinaryMask blocked(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (out.disc.at(x, y)) mark_disc(blocked, static_cast<long>(x), static_cast<long>(y), 3);
      if (out.vessels.at(x, y)) mark_disc(blocked, static_cast<long>(x), static_cast<long>(y), 1);
    }
  }
  static constexpr std::array<std::pair<int, int>, 4> kQuadrantSign = {{{1, -1}, {-1, -1}, {-1, 1}, {1, 1}}};
  for (auto kind : kAllLesionKinds) {
    const auto it = spec.lesions.find(kind);
    if (it == spec.lesions.end()) continue;
    const LesionSpec& ls = it->second;
    require(ls.min_radius >= 1 && ls.max_radius >= ls.min_radius, ErrorKind::kInvalidArgument,
            "lesion radii must satisfy 1 <= min <= max");
    BinaryMask& truth = out.lesions.at(kind);
    for (std::size_t q = 0; q < 4; ++q) {
      for (std::size_t n = 0; n < ls.per_quadrant[q]; ++n) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
          const int r = ls.min_radius + static_cast<int>(rng.below(static_cast<std::uint64_t>(ls.max_radius - ls.min_radius + 1)));
          const double clear = r + kLesionGap + 1.0;
          const double ox = clear + rng.uniform() * radius;
          const double oy = clear + rng.uniform() * radius;
          const long bx = std::lround(cx + kQuadrantSign[q].first * ox);
          const long by = std::lround(cy + kQuadrantSign[q].second * oy);
          if (std::hypot(bx - cx, by - cy) + r + 3.0 > radius) continue;
          if (std::abs(bx - cx) < clear || std::abs(by - cy) < clear) continue;
          const auto blob = disc_offsets(r);
          const bool free = std::all_of(blob.begin(), blob.end(), [&](const auto& o) {
            return inside(bx + o.first, by + o.second, w, h) &&
                   !blocked.at(static_cast<std::size_t>(bx + o.first), static_cast<std::size_t>(by + o.second));
          });
          if (!free) continue;
          for (const auto& [dx, dy] : blob) {
            const auto ux = static_cast<std::size_t>(bx + dx), uy = static_cast<std::size_t>(by + dy);
            truth.at(ux, uy) = 1;
            paint(out.image, ux, uy, lesion_color(kind), rng, 2.0);
          }
          mark_disc(blocked, bx, by, r + kLesionGap + 1);
          placed = true;
        }
        if (!placed) {
          fail(ErrorKind::kSpecOverflow, "cannot place " + std::to_string(ls.per_quadrant[q]) + " " +
                                             std::string(lesion_code(kind)) + " lesions in quadrant " +
                                             std::to_string(q + 1) + " of a " + std::to_string(w) + "x" +
                                             std::to_string(h) + " image");
        }
      }
    }
  }
  return out;
}

FeatureDataset gen_features(std::uint64_t seed, std::size_t n_per_class, std::size_t d, double class_separation) {
  require(d >= 2, ErrorKind::kInvalidArgument, "synthetic features need d >= 2");
  require(class_separation >= 0.0, ErrorKind::kInvalidArgument, "class separation must be >= 0");
  Rng rng(seed);
  // Orthonormal basis (u, v) of a random plane by Gram-Schmidt.
  std::vector<double> u(d), v(d);
  auto normalize = [](std::vector<double>& x) {
    double n = 0.0;
    for (double e : x) n += e * e;
    n = std::sqrt(n);
    for (double& e : x) e /= n;
  };
  for (auto& e : u) e = rng.normal();
  normalize(u);
  for (auto& e : v) e = rng.normal();
  double proj = 0.0;
  for (std::size_t j = 0; j < d; ++j) proj += u[j] * v[j];
  for (std::size_t j = 0; j < d; ++j) v[j] -= proj * u[j];
  normalize(v);

  const double circumradius = class_separation / std::sqrt(3.0);
  FeatureDataset ds;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double angle = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * static_cast<double>(c) / 3.0;
    const double a = circumradius * std::cos(angle), b = circumradius * std::sin(angle);
    for (std::size_t k = 0; k < n_per_class; ++k) {
      FeatureVector fv;
      fv.values.resize(d);
      for (std::size_t j = 0; j < d; ++j) fv.values[j] = a * u[j] + b * v[j] + rng.normal();
      ds.vectors.push_back(std::move(fv));
      ds.labels.push_back(label_at(c));
    }
  }
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span(order));
  FeatureDataset shuffled;
  for (std::size_t i = 0; i < order.size(); ++i) {
    shuffled.vectors.push_back(std::move(ds.vectors[order[i]]));
    shuffled.vectors.back().source_id = "syn" + std::to_string(seed) + "_" + std::to_string(i);
    shuffled.labels.push_back(ds.labels[order[i]]);
  }
  return shuffled;
}

RgbImage apply_channel_jitter(const RgbImage& img, const BinaryMask& field, const std::array<double, 3>& gain,
                              const std::array<double, 3>& offset) {
  require(img.same_shape(field), ErrorKind::kDimensionMismatch, "jitter field mask does not match the image");
  RgbImage out = img;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      if (!field.at(x, y)) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        // Floor of 12 keeps jittered field pixels inside the fundus threshold.
        out.at(x, y, c) = static_cast<std::uint8_t>(
            std::clamp(std::lround(img.at(x, y, c) * gain[c] + offset[c]), 12L, 255L));
      }
    }
  }
  return out;
}

ProbMask soft_probability(const BinaryMask& truth, std::uint64_t seed, float inside_p, float outside_p, float noise) {
  Rng rng(seed);
  std::vector<float> values(truth.pixel_count());
  const auto t = truth.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double base = t[i] ? inside_p : outside_p;
    values[i] = static_cast<float>(std::clamp(base + noise * (2.0 * rng.uniform() - 1.0), 0.0, 1.0));
  }
  return ProbMask(truth.width(), truth.height(), std::move(values));
}

}  // namespace drgrade
