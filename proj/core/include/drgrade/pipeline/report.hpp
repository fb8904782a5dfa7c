#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "drgrade/classifiers.hpp"
#include "drgrade/ensemble.hpp"
#include "drgrade/lesions.hpp"
#include "drgrade/trust.hpp"

namespace drgrade::pipeline {

struct LesionSummary {
  LesionKind kind = LesionKind::kMA;
  double threshold = 0.0;
  bool otsu_fallback = false;
  std::size_t components = 0;
  std::array<std::size_t, 4> quadrants{};
};

struct GradingReport {
  std::string source_id;
  ClassLabel ensemble_label = ClassLabel::kNoDR;
  std::array<double, kNumClasses> ensemble_scores{};
  std::vector<std::pair<ModelKind, ClassLabel>> member_votes;
  std::vector<LesionSummary> lesions;  // kAllLesionKinds order
  SeverityStage stage;
  // The more severe of the ensemble decision and the lesion-based stage.
  ClassLabel combined = ClassLabel::kNoDR;
  TrustReport trust;
  std::string config_fingerprint;
  std::vector<std::pair<std::string, double>> timings_ms;
};

ClassLabel combine_decisions(ClassLabel ensemble, ClassLabel lesion_stage) noexcept;

// Field order is fixed. "timings_ms" is always the last field so a report
// without it is a prefix-stable regression fixture.
nlohmann::ordered_json report_to_json(const GradingReport& report, bool include_timings = true);
GradingReport report_from_json(const nlohmann::json& doc);

std::string render_report_text(const GradingReport& report);

}  // namespace drgrade::pipeline
