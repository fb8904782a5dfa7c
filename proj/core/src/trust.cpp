#include "drgrade/trust.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "drgrade/error.hpp"

namespace drgrade {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double binary_entropy(double p) noexcept {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

Plane to_unit_plane(const GrayImage& img) {
  Plane out(img.width(), img.height());
  auto dst = out.data();
  const auto src = img.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] / 255.0;
  return out;
}

Plane resize_plane(const Plane& p, std::uint32_t width, std::uint32_t height) {
  if (p.same_shape(width, height)) return p;
  Plane out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = y * p.height() / height;
    for (std::size_t x = 0; x < width; ++x) out.at(x, y) = p.at(x * p.width() / width, sy);
  }
  return out;
}

struct Overlap {
  std::size_t tp = 0, fp = 0, fn = 0;
};

Overlap overlap(const BinaryMask& pred, const BinaryMask& truth) {
  require(pred.same_shape(truth), ErrorKind::kDimensionMismatch,
          "mask dimensions differ: " + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) + " vs " +
              std::to_string(truth.width()) + "x" + std::to_string(truth.height()));
  Overlap o;
  const auto a = pred.data();
  const auto b = truth.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0, tb = b[i] != 0;
    o.tp += pa && tb;
    o.fp += pa && !tb;
    o.fn += !pa && tb;
  }
  return o;
}

std::optional<double> optional_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void TrustWeights::validate() const {
  require(quality >= 0.0 && f1 >= 0.0 && confidence >= 0.0, ErrorKind::kInvalidArgument,
          "trust weights must be non-negative");
  require(std::abs(quality + f1 + confidence - 1.0) <= 1e-12, ErrorKind::kInvalidArgument,
          "trust weights must sum to 1");
}

double entropy_confidence(const ProbMask& p) {
  require(p.pixel_count() > 0, ErrorKind::kEmptyInput, "probability mask is empty");
  double total = 0.0;
  for (float v : p.data()) total += binary_entropy(static_cast<double>(v));
  const double mean = total / static_cast<double>(p.pixel_count());
  return std::clamp(1.0 - mean, 0.0, 1.0);
}

MseQuality mse_quality(const Plane& img, const Plane& reference) {
  const Plane a = resize_plane(img, kQualityGeometry, kQualityGeometry);
  const Plane b = resize_plane(reference, kQualityGeometry, kQualityGeometry);
  require(a.same_shape(b), ErrorKind::kDimensionMismatch, "quality planes differ in size after resize");
  double sum = 0.0;
  const auto pa = a.data();
  const auto pb = b.data();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    sum += d * d;
  }
  MseQuality r;
  r.mse = sum / static_cast<double>(pa.size());
  r.quality = 1.0 - std::min(r.mse, 1.0);
  return r;
}

MseQuality mse_quality(const GrayImage& img, const GrayImage& reference) {
  return mse_quality(to_unit_plane(img), to_unit_plane(reference));
}

double f1_score(const BinaryMask& pred, const BinaryMask& truth) {
  const Overlap o = overlap(pred, truth);
  const std::size_t denom = 2 * o.tp + o.fp + o.fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(o.tp) / static_cast<double>(denom);
}

double iou(const BinaryMask& pred, const BinaryMask& truth) {
  const Overlap o = overlap(pred, truth);
  const std::size_t uni = o.tp + o.fp + o.fn;
  return uni == 0 ? 1.0 : static_cast<double>(o.tp) / static_cast<double>(uni);
}

int weighted_trust(double quality, double f1, double confidence, const TrustWeights& w) {
  w.validate();
  for (double v : {quality, f1, confidence}) {
    require(v >= 0.0 && v <= 1.0, ErrorKind::kInvalidArgument, "trust inputs must lie in [0,1]");
  }
  return static_cast<int>(std::lround(100.0 * (w.quality * quality + w.f1 * f1 + w.confidence * confidence)));
}

std::string_view kappa_band(double kappa) noexcept {
  if (kappa < 0.0) return "The agreement is weaker than by chance";
  if (kappa == 0.0) return "Agreement equals chance";
  if (kappa < 0.2) return "Weak agreement";
  if (kappa < 0.4) return "Moderate agreement";
  if (kappa < 0.6) return "Medium agreement";
  if (kappa < 0.8) return "Significant agreement";
  return "Almost perfect match";
}

KappaResult cohen_kappa(std::span<const int> a, std::span<const int> b) {
  require(a.size() == b.size(), ErrorKind::kDimensionMismatch,
          "kappa sequences differ in length: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  require(!a.empty(), ErrorKind::kEmptyInput, "kappa needs at least one rated item");
  std::map<int, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
    agree += a[i] == b[i];
  }
  const auto n = static_cast<double>(a.size());
  KappaResult r;
  r.observed = static_cast<double>(agree) / n;
  for (const auto& [category, counts] : marginals) {
    r.expected += (static_cast<double>(counts.first) / n) * (static_cast<double>(counts.second) / n);
  }
  r.kappa = r.expected >= 1.0 ? 1.0 : (r.observed - r.expected) / (1.0 - r.expected);
  r.band = std::string(kappa_band(r.kappa));
  return r;
}

ordered_json trust_to_json(const TrustReport& report) {
  ordered_json out = ordered_json::object();
  for (auto kind : kTableLesionOrder) {
    const auto it = report.find(kind);
    if (it == report.end()) continue;
    const LesionTrust& t = it->second;
    ordered_json j;
    j["confidence"] = t.confidence;
    j["quality"] = t.quality ? json(*t.quality) : json(nullptr);
    j["f1"] = t.f1 ? json(*t.f1) : json(nullptr);
    j["iou"] = t.iou ? json(*t.iou) : json(nullptr);
    j["trust_pct"] = t.trust_pct;
    out[std::string(lesion_code(kind))] = std::move(j);
  }
  return out;
}

TrustReport trust_from_json(const json& doc) {
  TrustReport report;
  try {
    for (const auto& [code, j] : doc.items()) {
      LesionTrust t;
      t.confidence = j.at("confidence").get<double>();
      t.quality = optional_number(j, "quality");
      t.f1 = optional_number(j, "f1");
      t.iou = optional_number(j, "iou");
      t.trust_pct = j.at("trust_pct").get<int>();
      report[parse_lesion_kind(code)] = t;
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kCorruptPayload, std::string("invalid trust report: ") + e.what());
  }
  return report;
}

std::string render_trust_table(const TrustReport& report) {
  auto cell = [](std::optional<double> v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *v);
    return std::string(buf);
  };
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-13s", "Lesion");
  out += line;
  for (auto k : kTableLesionOrder) {
    std::snprintf(line, sizeof(line), " %6s", std::string(lesion_code(k)).c_str());
    out += line;
  }
  out += "\n";
  auto row = [&](const char* title, auto getter) {
    std::snprintf(line, sizeof(line), "%-13s", title);
    out += line;
    for (auto k : kTableLesionOrder) {
      const auto it = report.find(k);
      const std::string text = it == report.end() ? "-" : getter(it->second);
      std::snprintf(line, sizeof(line), " %6s", text.c_str());
      out += line;
    }
    out += "\n";
  };
  row("Confidence", [&](const LesionTrust& t) { return cell(t.confidence); });
  row("Quality", [&](const LesionTrust& t) { return cell(t.quality); });
  row("F1", [&](const LesionTrust& t) { return cell(t.f1); });
  row("IoU score", [&](const LesionTrust& t) { return cell(t.iou); });
  row("Module Trust", [](const LesionTrust& t) { return std::to_string(t.trust_pct) + "%"; });
  return out;
}

}  // namespace drgrade
