#include "drgrade/lesions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drgrade/error.hpp"

namespace drgrade {

namespace {

constexpr std::size_t kOtsuBins = 256;
constexpr std::size_t kSevereHemorrhagesPerQuadrant = 20;

std::size_t otsu_bin(float p) noexcept {
  return std::min<std::size_t>(kOtsuBins - 1, static_cast<std::size_t>(static_cast<double>(p) * kOtsuBins));
}

// Union-find over provisional labels.
class DisjointSets {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

std::string_view lesion_code(LesionKind kind) noexcept {
  switch (kind) {
    case LesionKind::kMA: return "MA";
    case LesionKind::kHEM: return "HEM";
    case LesionKind::kSE: return "SE";
    case LesionKind::kHE: return "HE";
  }
  return "?";
}

LesionKind parse_lesion_kind(std::string_view code) {
  for (auto k : kAllLesionKinds) {
    if (lesion_code(k) == code) return k;
  }
  fail(ErrorKind::kInvalidArgument, "unknown lesion kind '" + std::string(code) + "'");
}

std::string_view stage_name(Stage5 stage) noexcept {
  switch (stage) {
    case Stage5::kS0: return "S0";
    case Stage5::kS1: return "S1";
    case Stage5::kS2: return "S2";
    case Stage5::kS3: return "S3";
    case Stage5::kS4: return "S4";
  }
  return "?";
}

ClassLabel collapse_stage(Stage5 stage) noexcept {
  switch (stage) {
    case Stage5::kS0: return ClassLabel::kNoDR;
    case Stage5::kS1:
    case Stage5::kS2: return ClassLabel::kMildDR;
    case Stage5::kS3:
    case Stage5::kS4: return ClassLabel::kSevereDR;
  }
  return ClassLabel::kSevereDR;
}

double otsu_threshold(const ProbMask& p) {
  std::array<double, kOtsuBins> count{};
  std::array<double, kOtsuBins> sum{};
  for (float v : p.data()) {
    const std::size_t b = otsu_bin(v);
    count[b] += 1.0;
    sum[b] += v;
  }
  const std::size_t occupied =
      static_cast<std::size_t>(std::count_if(count.begin(), count.end(), [](double c) { return c > 0.0; }));
  require(occupied >= 2, ErrorKind::kConstantMask, "probability mask is constant; no threshold separates it");

  const double total = static_cast<double>(p.pixel_count());
  const double total_sum = std::accumulate(sum.begin(), sum.end(), 0.0);
  double n0 = 0.0;
  double s0 = 0.0;
  double best_var = -1.0;
  std::size_t best_k = 1;
  for (std::size_t k = 1; k < kOtsuBins; ++k) {
    n0 += count[k - 1];
    s0 += sum[k - 1];
    const double n1 = total - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double mu0 = s0 / n0;
    const double mu1 = (total_sum - s0) / n1;
    const double w0 = n0 / total;
    const double w1 = n1 / total;
    const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_k = k;
    }
  }
  return static_cast<double>(best_k) / static_cast<double>(kOtsuBins);
}

BinaryMask binarize(const ProbMask& p, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::kInvalidArgument, "threshold must lie in [0,1]");
  BinaryMask out(p.width(), p.height());
  auto dst = out.data();
  const auto src = p.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]) >= threshold ? 1 : 0;
  return out;
}

std::vector<LesionComponent> connected_components(const BinaryMask& mask, std::size_t min_area) {
  const std::size_t w = mask.width();
  const std::size_t h = mask.height();
  constexpr std::uint32_t kNone = ~std::uint32_t{0};
  std::vector<std::uint32_t> labels(w * h, kNone);
  DisjointSets sets;

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      std::uint32_t label = kNone;
      // Already-visited 8-neighbours: W, NW, N, NE.
      const std::array<std::pair<long, long>, 4> prior = {{{-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
      for (const auto& [dx, dy] : prior) {
        const long nx = static_cast<long>(x) + dx;
        const long ny = static_cast<long>(y) + dy;
        if (nx < 0 || ny < 0 || nx >= static_cast<long>(w)) continue;
        const std::uint32_t other = labels[static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx)];
        if (other == kNone) continue;
        if (label == kNone) {
          label = other;
        } else {
          sets.unite(label, other);
        }
      }
      labels[y * w + x] = label == kNone ? sets.make() : label;
    }
  }

  std::vector<LesionComponent> components;
  std::vector<std::uint32_t> slot;  // root label -> component index
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNone) continue;
    const std::uint32_t root = sets.find(labels[i]);
    if (root >= slot.size()) slot.resize(root + 1, kNone);
    if (slot[root] == kNone) {
      slot[root] = static_cast<std::uint32_t>(components.size());
      components.emplace_back();
    }
    components[slot[root]].pixels.push_back(static_cast<std::uint32_t>(i));
  }

  std::vector<LesionComponent> kept;
  for (auto& c : components) {
    c.area = c.pixels.size();
    if (c.area < min_area) continue;
    double sx = 0.0, sy = 0.0;
    for (auto idx : c.pixels) {
      sx += static_cast<double>(idx % w);
      sy += static_cast<double>(idx / w);
    }
    c.centroid = {sx / static_cast<double>(c.area), sy / static_cast<double>(c.area)};
    kept.push_back(std::move(c));
  }
  return kept;
}

int quadrant_of(Point centroid, Point center) noexcept {
  const bool upper = centroid.y <= center.y;
  if (upper) return centroid.x >= center.x ? 1 : 2;
  return centroid.x > center.x ? 4 : 3;
}

std::array<std::size_t, 4> quadrant_counts(const LesionMap& map, std::uint32_t width, std::uint32_t height,
                                           Point center) {
  require(center.x >= 0.0 && center.y >= 0.0 && center.x < width && center.y < height, ErrorKind::kInvalidArgument,
          "quadrant centre lies outside the image");
  std::array<std::size_t, 4> counts{};
  for (const auto& c : map.components) ++counts[static_cast<std::size_t>(quadrant_of(c.centroid, center) - 1)];
  return counts;
}

Point fundus_center(const BinaryMask& fundus) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < fundus.height(); ++y) {
    for (std::size_t x = 0; x < fundus.width(); ++x) {
      if (!fundus.at(x, y)) continue;
      sx += static_cast<double>(x);
      sy += static_cast<double>(y);
      ++n;
    }
  }
  if (n == 0) return {(fundus.width() - 1) / 2.0, (fundus.height() - 1) / 2.0};
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

SeverityStage stage(const std::map<LesionKind, LesionMap>& lesions, std::uint32_t width, std::uint32_t height,
                    Point center) {
  for (auto k : kAllLesionKinds) {
    require(lesions.contains(k), ErrorKind::kMissingEntry,
            "staging needs a lesion map for " + std::string(lesion_code(k)));
  }
  auto count = [&](LesionKind k) { return lesions.at(k).components.size(); };
  SeverityStage s;
  const auto hem = quadrant_counts(lesions.at(LesionKind::kHEM), width, height, center);
  const bool severe = std::all_of(hem.begin(), hem.end(), [](std::size_t c) { return c > kSevereHemorrhagesPerQuadrant; });
  if (severe) {
    s.five = Stage5::kS3;
    s.reason = "More than 20 intraretinal hemorrhages in each of 4 quadrants (HEM per quadrant: " +
               std::to_string(hem[0]) + "/" + std::to_string(hem[1]) + "/" + std::to_string(hem[2]) + "/" +
               std::to_string(hem[3]) + ")";
  } else if (count(LesionKind::kMA) + count(LesionKind::kHEM) + count(LesionKind::kSE) + count(LesionKind::kHE) == 0) {
    s.five = Stage5::kS0;
    s.reason = "No abnormalities";
  } else if (count(LesionKind::kHEM) + count(LesionKind::kSE) + count(LesionKind::kHE) == 0) {
    s.five = Stage5::kS1;
    s.reason = "Microaneurysms only (" + std::to_string(count(LesionKind::kMA)) + " MA)";
  } else {
    s.five = Stage5::kS2;
    s.reason = "More than just microaneurysms but less than severe NPDR (MA " + std::to_string(count(LesionKind::kMA)) +
               ", HEM " + std::to_string(count(LesionKind::kHEM)) + ", SE " + std::to_string(count(LesionKind::kSE)) +
               ", HE " + std::to_string(count(LesionKind::kHE)) + ")";
  }
  s.three = collapse_stage(s.five);
  return s;
}

LesionAnalysis analyze_lesion(LesionKind kind, const ProbMask& p, const LesionPolicy& policy) {
  LesionAnalysis a;
  if (policy.fixed_threshold) {
    a.threshold = *policy.fixed_threshold;
  } else {
    try {
      a.threshold = otsu_threshold(p);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kConstantMask) throw;
      a.threshold = 0.5;
      a.otsu_fallback = true;
    }
  }
  a.mask = binarize(p, a.threshold);
  a.map.kind = kind;
  a.map.components = connected_components(a.mask, policy.min_area);
  return a;
}

}  // namespace drgrade
