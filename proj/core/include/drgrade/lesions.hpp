#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drgrade/features.hpp"
#include "drgrade/image.hpp"

namespace drgrade {

enum class LesionKind { kMA, kHEM, kSE, kHE };

inline constexpr std::array<LesionKind, 4> kAllLesionKinds = {LesionKind::kMA, LesionKind::kHEM, LesionKind::kSE,
                                                              LesionKind::kHE};
// Column order used by tabular trust output.
inline constexpr std::array<LesionKind, 4> kTableLesionOrder = {LesionKind::kHEM, LesionKind::kSE, LesionKind::kHE,
                                                                LesionKind::kMA};

std::string_view lesion_code(LesionKind kind) noexcept;  // "MA", "HEM", "SE", "HE"
LesionKind parse_lesion_kind(std::string_view code);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct LesionComponent {
  std::vector<std::uint32_t> pixels;  // linear indices y * width + x, ascending
  std::size_t area = 0;
  Point centroid;
  int quadrant = 0;  // 1..4 once assigned, 0 otherwise
};

struct LesionMap {
  LesionKind kind = LesionKind::kMA;
  std::vector<LesionComponent> components;
};

enum class Stage5 { kS0 = 0, kS1 = 1, kS2 = 2, kS3 = 3, kS4 = 4 };

std::string_view stage_name(Stage5 stage) noexcept;
ClassLabel collapse_stage(Stage5 stage) noexcept;

struct SeverityStage {
  Stage5 five = Stage5::kS0;
  ClassLabel three = ClassLabel::kNoDR;
  std::string reason;
};

// Between-class-variance maximiser over a 256-bin histogram. Returns k / 256
// for the winning split (bins < k vs bins >= k); the lowest k wins ties.
// Throws kConstantMask when every value falls in a single bin.
double otsu_threshold(const ProbMask& p);

BinaryMask binarize(const ProbMask& p, double threshold);

// 8-connected labelling; components smaller than min_area are dropped.
// Components are ordered by their first pixel in raster order.
std::vector<LesionComponent> connected_components(const BinaryMask& mask, std::size_t min_area);

// Quadrants around center (image y grows downward): 1 upper-right,
// 2 upper-left, 3 lower-left, 4 lower-right. A centroid on a dividing line
// goes to the lower-numbered neighbour.
int quadrant_of(Point centroid, Point center) noexcept;
std::array<std::size_t, 4> quadrant_counts(const LesionMap& map, std::uint32_t width, std::uint32_t height,
                                           Point center);

// Centroid of the fundus field; falls back to the image centre for an empty mask.
Point fundus_center(const BinaryMask& fundus);

SeverityStage stage(const std::map<LesionKind, LesionMap>& lesions, std::uint32_t width, std::uint32_t height,
                    Point center);

struct LesionPolicy {
  std::optional<double> fixed_threshold;  // Otsu when unset
  std::size_t min_area = 5;
};

struct LesionAnalysis {
  double threshold = 0.0;
  bool otsu_fallback = false;  // constant mask, fixed 0.5 used instead
  BinaryMask mask;
  LesionMap map;
};

LesionAnalysis analyze_lesion(LesionKind kind, const ProbMask& p, const LesionPolicy& policy);

}  // namespace drgrade
