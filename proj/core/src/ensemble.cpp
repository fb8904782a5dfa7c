#include "drgrade/ensemble.hpp"

#include <cmath>

#include "drgrade/error.hpp"
#include "drgrade/imgio.hpp"

namespace drgrade {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view weight_basis_name(WeightBasis basis) noexcept {
  return basis == WeightBasis::kOverallAccuracy ? "overall_accuracy" : "per_class_accuracy";
}

WeightBasis parse_weight_basis(std::string_view name) {
  if (name == "overall_accuracy") return WeightBasis::kOverallAccuracy;
  if (name == "per_class_accuracy") return WeightBasis::kPerClassAccuracy;
  fail(ErrorKind::kInvalidArgument, "unknown weight basis '" + std::string(name) + "'");
}

EnsembleModel::EnsembleModel(std::vector<std::shared_ptr<const TrainedModel>> members,
                             std::vector<MemberWeights> weights, WeightBasis basis)
    : members_(std::move(members)), weights_(std::move(weights)), basis_(basis) {
  require(!members_.empty(), ErrorKind::kInvalidArgument, "ensemble needs at least one member");
  require(members_.size() == weights_.size(), ErrorKind::kDimensionMismatch,
          "ensemble has " + std::to_string(members_.size()) + " members but " + std::to_string(weights_.size()) +
              " weights");
  bool any_positive = false;
  for (std::size_t m = 0; m < members_.size(); ++m) {
    require(members_[m] != nullptr, ErrorKind::kInvalidArgument, "null ensemble member");
    require(members_[m]->dimension() == members_.front()->dimension(), ErrorKind::kDimensionMismatch,
            "ensemble members disagree on feature dimension");
    for (double w : weights_[m].by_class) {
      require(std::isfinite(w) && w >= 0.0, ErrorKind::kInvalidArgument, "ensemble weights must be finite and >= 0");
      any_positive = any_positive || w > 0.0;
    }
  }
  require(any_positive, ErrorKind::kInvalidArgument, "at least one ensemble weight must be positive");
}

std::size_t EnsembleModel::dimension() const noexcept { return members_.front()->dimension(); }

EnsembleModel fit_weights(std::vector<std::shared_ptr<const TrainedModel>> members, const FeatureDataset& val,
                          WeightBasis basis) {
  require(!members.empty(), ErrorKind::kInvalidArgument, "cannot fit weights for an empty member list");
  require(val.size() > 0, ErrorKind::kEmptyInput, "validation split is empty");
  std::vector<MemberWeights> weights;
  weights.reserve(members.size());
  for (const auto& m : members) {
    const ValidationResult r = validate(*m, val);
    MemberWeights w;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (basis == WeightBasis::kOverallAccuracy) {
        w.by_class[c] = r.accuracy;
      } else {
        // A class missing from the validation split gives no evidence either way.
        w.by_class[c] = std::isnan(r.per_class[c]) ? r.accuracy : r.per_class[c];
      }
    }
    weights.push_back(w);
  }
  return EnsembleModel(std::move(members), std::move(weights), basis);
}

VoteResult vote(const EnsembleModel& ensemble, std::span<const double> x) {
  VoteResult result;
  result.member_votes.reserve(ensemble.members().size());
  for (std::size_t m = 0; m < ensemble.members().size(); ++m) {
    const ClassLabel pred = ensemble.members()[m]->predict(x);
    result.member_votes.push_back(pred);
    result.scores[index_of(pred)] += ensemble.weights()[m].by_class[index_of(pred)];
  }
  result.label = label_at(severity_argmax(result.scores));
  return result;
}

double ensemble_accuracy(const EnsembleModel& ensemble, const FeatureDataset& split) {
  require(split.size() > 0, ErrorKind::kEmptyInput, "evaluation split is empty");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) correct += vote(ensemble, split.vectors[i]).label == split.labels[i];
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

void save_ensemble(const EnsembleModel& ensemble, const std::vector<std::filesystem::path>& member_paths,
                   const std::filesystem::path& path, const std::optional<Scaler>& scaler) {
  require(member_paths.size() == ensemble.members().size(), ErrorKind::kDimensionMismatch,
          "one path per ensemble member is required");
  ordered_json doc;
  doc["format_version"] = kEnsembleFormatVersion;
  const auto base = std::filesystem::absolute(path).parent_path();
  doc["member_paths"] = json::array();
  for (const auto& p : member_paths) {
    const auto rel = std::filesystem::absolute(p).lexically_relative(base);
    doc["member_paths"].push_back(rel.empty() ? std::filesystem::absolute(p).generic_string() : rel.generic_string());
  }
  doc["weights"] = json::array();
  for (const auto& w : ensemble.weights()) {
    if (ensemble.basis() == WeightBasis::kOverallAccuracy) {
      doc["weights"].push_back(w.by_class[0]);
    } else {
      doc["weights"].push_back(w.by_class);
    }
  }
  doc["weight_basis"] = weight_basis_name(ensemble.basis());
  if (scaler) doc["scaler"] = {{"mean", scaler->mean}, {"std", scaler->stddev}};
  const std::string text = doc.dump(1) + "\n";
  write_file_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

LoadedEnsemble load_ensemble(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  json doc;
  try {
    doc = json::parse(reinterpret_cast<const char*>(bytes.data()),
                      reinterpret_cast<const char*>(bytes.data()) + bytes.size());
  } catch (const json::exception& e) {
    fail(ErrorKind::kCorruptPayload, "corrupt ensemble file '" + path.string() + "': " + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    require(version == kEnsembleFormatVersion, ErrorKind::kVersionMismatch,
            "ensemble format version " + std::to_string(version) + " is not supported");
    const WeightBasis basis = parse_weight_basis(doc.at("weight_basis").get<std::string>());
    const auto base = path.parent_path();
    std::vector<std::shared_ptr<const TrainedModel>> members;
    for (const auto& p : doc.at("member_paths")) {
      std::filesystem::path member = p.get<std::string>();
      if (member.is_relative()) member = base / member;
      members.push_back(std::make_shared<const TrainedModel>(load_model(member)));
    }
    std::vector<MemberWeights> weights;
    for (const auto& w : doc.at("weights")) {
      MemberWeights mw;
      if (w.is_number()) {
        mw.by_class.fill(w.get<double>());
      } else {
        require(w.is_array() && w.size() == kNumClasses, ErrorKind::kCorruptPayload,
                "per-class ensemble weight must have 3 entries");
        for (std::size_t c = 0; c < kNumClasses; ++c) mw.by_class[c] = w[c].get<double>();
      }
      weights.push_back(mw);
    }
    std::optional<Scaler> scaler;
    if (doc.contains("scaler")) {
      scaler = Scaler{doc["scaler"].at("mean").get<std::vector<double>>(),
                      doc["scaler"].at("std").get<std::vector<double>>()};
      require(scaler->mean.size() == scaler->stddev.size(), ErrorKind::kCorruptPayload, "scaler arrays differ in length");
    }
    return {EnsembleModel(std::move(members), std::move(weights), basis), std::move(scaler)};
  } catch (const json::exception& e) {
    fail(ErrorKind::kCorruptPayload, "invalid ensemble file '" + path.string() + "': " + e.what());
  }
}

}  // namespace drgrade
