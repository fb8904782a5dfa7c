#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "drgrade/classifiers.hpp"
#include "drgrade/features.hpp"

namespace drgrade {

enum class WeightBasis { kOverallAccuracy, kPerClassAccuracy };

std::string_view weight_basis_name(WeightBasis basis) noexcept;
WeightBasis parse_weight_basis(std::string_view name);

// Weights are stored per member and per candidate class. Under the overall
// basis every class column of a member carries the same value.
struct MemberWeights {
  std::array<double, kNumClasses> by_class{};
};

class EnsembleModel {
 public:
  EnsembleModel(std::vector<std::shared_ptr<const TrainedModel>> members, std::vector<MemberWeights> weights,
                WeightBasis basis);

  const std::vector<std::shared_ptr<const TrainedModel>>& members() const noexcept { return members_; }
  const std::vector<MemberWeights>& weights() const noexcept { return weights_; }
  WeightBasis basis() const noexcept { return basis_; }
  std::size_t dimension() const noexcept;

 private:
  std::vector<std::shared_ptr<const TrainedModel>> members_;
  std::vector<MemberWeights> weights_;
  WeightBasis basis_;
};

struct VoteResult {
  ClassLabel label = ClassLabel::kNoDR;
  std::array<double, kNumClasses> scores{};
  std::vector<ClassLabel> member_votes;
};

// Weights are validation accuracies (overall or per true class) and are kept
// unnormalised.
EnsembleModel fit_weights(std::vector<std::shared_ptr<const TrainedModel>> members, const FeatureDataset& val,
                          WeightBasis basis = WeightBasis::kPerClassAccuracy);

// score(c) = sum_m w_m(c) * [member m predicts c]; exact ties go to the more
// severe class.
VoteResult vote(const EnsembleModel& ensemble, std::span<const double> x);
inline VoteResult vote(const EnsembleModel& ensemble, const FeatureVector& x) { return vote(ensemble, x.values); }

double ensemble_accuracy(const EnsembleModel& ensemble, const FeatureDataset& split);

inline constexpr int kEnsembleFormatVersion = 1;

// Ensemble file: {format_version, member_paths, weights, weight_basis[, scaler]}.
// Member paths are written relative to the ensemble file's directory.
void save_ensemble(const EnsembleModel& ensemble, const std::vector<std::filesystem::path>& member_paths,
                   const std::filesystem::path& path, const std::optional<Scaler>& scaler = std::nullopt);

struct LoadedEnsemble {
  EnsembleModel model;
  std::optional<Scaler> scaler;
};

LoadedEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace drgrade
