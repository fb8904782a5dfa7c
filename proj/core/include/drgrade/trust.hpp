#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "drgrade/image.hpp"
#include "drgrade/lesions.hpp"

namespace drgrade {

struct TrustWeights {
  double quality = 0.4;
  double f1 = 0.3;
  double confidence = 0.3;

  void validate() const;
};

struct LesionTrust {
  double confidence = 0.0;
  std::optional<double> quality;
  std::optional<double> f1;
  std::optional<double> iou;
  int trust_pct = 0;
};

using TrustReport = std::map<LesionKind, LesionTrust>;

// 1 - mean per-pixel binary entropy (bits); 0 log 0 := 0.
double entropy_confidence(const ProbMask& p);

struct MseQuality {
  double mse = 0.0;
  double quality = 1.0;
};

inline constexpr std::uint32_t kQualityGeometry = 512;

// Both inputs are resized to 512x512 (nearest neighbour); 8-bit intensities
// are scaled to [0,1]. quality = 1 - min(mse, 1).
MseQuality mse_quality(const GrayImage& img, const GrayImage& reference);
MseQuality mse_quality(const Plane& img, const Plane& reference);

// 2TP / (2TP + FP + FN); 1 when both masks are empty.
double f1_score(const BinaryMask& pred, const BinaryMask& truth);
// |A n B| / |A u B|; 1 when both masks are empty.
double iou(const BinaryMask& pred, const BinaryMask& truth);

// 100 (w_q q + w_f f1 + w_c c), rounded to the nearest integer percent.
int weighted_trust(double quality, double f1, double confidence, const TrustWeights& w = {});

struct KappaResult {
  double kappa = 0.0;
  double observed = 0.0;  // P_o
  double expected = 0.0;  // P_e
  std::string band;
};

std::string_view kappa_band(double kappa) noexcept;

// Cohen's kappa for two equal-length category sequences. P_e == 1 (both
// raters constant on the same category) yields kappa 1.
KappaResult cohen_kappa(std::span<const int> a, std::span<const int> b);

nlohmann::ordered_json trust_to_json(const TrustReport& report);
TrustReport trust_from_json(const nlohmann::json& doc);
// Rows: Confidence, Quality, F1, IoU score, Module Trust; columns HEM SE HE MA.
std::string render_trust_table(const TrustReport& report);

}  // namespace drgrade
