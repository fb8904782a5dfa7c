#include "drgrade/pipeline/report.hpp"

#include <cstdio>
#include <sstream>

#include "drgrade/error.hpp"

namespace drgrade::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ClassLabel label_from_name(const json& j) {
  const auto name = j.get<std::string>();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (label_name(label_at(c)) == name) return label_at(c);
  }
  fail(ErrorKind::kCorruptPayload, "unknown class label '" + name + "' in grading report");
}

}  // namespace

ClassLabel combine_decisions(ClassLabel ensemble, ClassLabel lesion_stage) noexcept {
  return index_of(ensemble) >= index_of(lesion_stage) ? ensemble : lesion_stage;
}

ordered_json report_to_json(const GradingReport& r, bool include_timings) {
  ordered_json doc;
  doc["source_id"] = r.source_id;

  ordered_json ens;
  ens["label"] = label_name(r.ensemble_label);
  ordered_json scores;
  for (std::size_t c = 0; c < kNumClasses; ++c) scores[std::string(label_name(label_at(c)))] = r.ensemble_scores[c];
  ens["scores"] = scores;
  ens["member_votes"] = ordered_json::array();
  for (const auto& [kind, vote] : r.member_votes) {
    ens["member_votes"].push_back({{"model", model_kind_name(kind)}, {"vote", label_name(vote)}});
  }
  doc["ensemble"] = ens;

  ordered_json lesions;
  for (const auto& l : r.lesions) {
    ordered_json j;
    j["threshold"] = l.threshold;
    j["otsu_fallback"] = l.otsu_fallback;
    j["components"] = l.components;
    j["quadrants"] = l.quadrants;
    lesions[std::string(lesion_code(l.kind))] = j;
  }
  doc["lesions"] = lesions;

  doc["stage"] = {{"five", stage_name(r.stage.five)},
                  {"three", label_name(r.stage.three)},
                  {"reason", r.stage.reason}};
  doc["combined"] = label_name(r.combined);
  doc["trust"] = trust_to_json(r.trust);
  doc["config_fingerprint"] = r.config_fingerprint;
  if (include_timings) {
    ordered_json t;
    for (const auto& [name, ms] : r.timings_ms) t[name] = ms;
    doc["timings_ms"] = t;
  }
  return doc;
}

GradingReport report_from_json(const json& doc) {
  GradingReport r;
  try {
    r.source_id = doc.at("source_id").get<std::string>();
    const json& ens = doc.at("ensemble");
    r.ensemble_label = label_from_name(ens.at("label"));
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      r.ensemble_scores[c] = ens.at("scores").at(std::string(label_name(label_at(c)))).get<double>();
    }
    for (const auto& v : ens.at("member_votes")) {
      r.member_votes.emplace_back(parse_model_kind(v.at("model").get<std::string>()),
                                  label_from_name(v.at("vote")));
    }
    for (auto kind : kAllLesionKinds) {
      const auto code = std::string(lesion_code(kind));
      if (!doc.at("lesions").contains(code)) continue;
      const json& j = doc.at("lesions").at(code);
      LesionSummary l;
      l.kind = kind;
      l.threshold = j.at("threshold").get<double>();
      l.otsu_fallback = j.at("otsu_fallback").get<bool>();
      l.components = j.at("components").get<std::size_t>();
      l.quadrants = j.at("quadrants").get<std::array<std::size_t, 4>>();
      r.lesions.push_back(l);
    }
    const json& st = doc.at("stage");
    const std::string five = st.at("five").get<std::string>();
    bool found = false;
    for (int s = 0; s <= 4; ++s) {
      if (stage_name(static_cast<Stage5>(s)) == five) {
        r.stage.five = static_cast<Stage5>(s);
        found = true;
      }
    }
    require(found, ErrorKind::kCorruptPayload, "unknown stage '" + five + "'");
    r.stage.three = label_from_name(st.at("three"));
    r.stage.reason = st.at("reason").get<std::string>();
    r.combined = label_from_name(doc.at("combined"));
    r.trust = trust_from_json(doc.at("trust"));
    r.config_fingerprint = doc.at("config_fingerprint").get<std::string>();
    if (doc.contains("timings_ms")) {
      for (const auto& [name, ms] : doc.at("timings_ms").items()) r.timings_ms.emplace_back(name, ms.get<double>());
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kCorruptPayload, std::string("malformed grading report: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::kCorruptPayload, std::string("malformed grading report: ") + e.what());
  }
  return r;
}

std::string render_report_text(const GradingReport& r) {
  std::ostringstream os;
  char buf[128];
  os << "source: " << r.source_id << "\n";
  os << "ensemble: " << label_name(r.ensemble_label) << " (scores";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::snprintf(buf, sizeof buf, " %s=%.4f", std::string(label_name(label_at(c))).c_str(), r.ensemble_scores[c]);
    os << buf;
  }
  os << ")\n";
  for (const auto& [kind, vote] : r.member_votes) {
    os << "  " << model_display_name(kind) << ": " << label_name(vote) << "\n";
  }
  os << "lesions:\n";
  for (const auto& l : r.lesions) {
    std::snprintf(buf, sizeof buf, "  %-3s %4zu components, quadrants %zu/%zu/%zu/%zu, threshold %.4f%s\n",
                  std::string(lesion_code(l.kind)).c_str(), l.components, l.quadrants[0], l.quadrants[1],
                  l.quadrants[2], l.quadrants[3], l.threshold, l.otsu_fallback ? " (fixed, constant mask)" : "");
    os << buf;
  }
  os << "stage: " << stage_name(r.stage.five) << " / " << label_name(r.stage.three) << ": " << r.stage.reason
     << "\n";
  os << "combined: " << label_name(r.combined) << "\n";
  if (!r.trust.empty()) os << "\n" << render_trust_table(r.trust);
  os << "config: " << r.config_fingerprint << "\n";
  return os.str();
}

}  // namespace drgrade::pipeline
