#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "drgrade/features.hpp"

namespace drgrade {

enum class ModelKind { kSvmLinear, kSvmPoly, kSvmRbf, kSvmCrammerSinger, kRandomForest, kNaiveBayes };

inline constexpr std::array<ModelKind, 6> kAllModelKinds = {
    ModelKind::kSvmLinear,        ModelKind::kSvmPoly,      ModelKind::kSvmRbf,
    ModelKind::kSvmCrammerSinger, ModelKind::kRandomForest, ModelKind::kNaiveBayes};

std::string_view model_kind_name(ModelKind kind) noexcept;   // e.g. "svm_linear"
std::string_view model_display_name(ModelKind kind) noexcept;  // e.g. "SVM Linear Kernel"
ModelKind parse_model_kind(std::string_view name);

struct Hyperparams {
  double c = 1.0;                // SVM regularisation, lambda = 1 / (C n)
  int poly_degree = 3;
  double poly_coef0 = 1.0;
  std::optional<double> gamma;   // kernel width; 1/d when unset
  int n_trees = 100;
  int max_depth = 16;
  int epochs = 30;
  double learning_rate = 1e-3;   // initial step, decayed as 1/t
  std::size_t support_budget = 2000;

  void validate() const;
  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

// w_c . x + b_c per class; used by one-vs-rest linear and Crammer-Singer SVMs.
struct LinearParams {
  std::array<std::vector<double>, kNumClasses> weights;
  std::array<double, kNumClasses> bias{};
};

enum class KernelType { kPolynomial, kRbf };

// f(x) = sum_j coef_j K(s_j, x) + bias.
struct KernelMachine {
  std::vector<std::vector<double>> support;
  std::vector<double> coef;
  double bias = 0.0;
};

struct KernelParams {
  KernelType type = KernelType::kRbf;
  double gamma = 1.0;
  int degree = 3;
  double coef0 = 1.0;
  std::array<KernelMachine, kNumClasses> machines;  // one-vs-rest
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  ClassLabel label = ClassLabel::kNoDR;
};

struct ForestParams {
  std::vector<std::vector<TreeNode>> trees;  // node 0 is the root
};

struct NaiveBayesParams {
  std::array<double, kNumClasses> log_prior{};
  std::array<std::vector<double>, kNumClasses> mean;
  std::array<std::vector<double>, kNumClasses> variance;
};

double kernel_value(const KernelParams& params, std::span<const double> a, std::span<const double> b) noexcept;

class TrainedModel {
 public:
  using Parameters = std::variant<LinearParams, KernelParams, ForestParams, NaiveBayesParams>;

  TrainedModel(ModelKind kind, Hyperparams hp, std::uint64_t seed, std::size_t dimension,
               Parameters parameters);

  ModelKind kind() const noexcept { return kind_; }
  const Hyperparams& hyperparams() const noexcept { return hp_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t dimension() const noexcept { return dimension_; }
  const Parameters& parameters() const noexcept { return parameters_; }

  // Per-class decision scores: margins for SVMs, vote counts for the forest,
  // posterior probabilities for naive Bayes.
  std::array<double, kNumClasses> scores(std::span<const double> x) const;
  ClassLabel predict(std::span<const double> x) const;
  ClassLabel predict(const FeatureVector& x) const { return predict(x.values); }

 private:
  ModelKind kind_;
  Hyperparams hp_;
  std::uint64_t seed_;
  std::size_t dimension_;
  Parameters parameters_;
};

// Average training loss recorded after every epoch (SGD-trained SVMs only).
struct TrainingTrace {
  std::vector<double> epoch_loss;
};

// Deterministic for a fixed (kind, ds, hp, seed). Every class must be present.
TrainedModel train(ModelKind kind, const FeatureDataset& ds, const Hyperparams& hp, std::uint64_t seed,
                   TrainingTrace* trace = nullptr);

struct ValidationResult {
  double accuracy = 0.0;
  // NaN for classes absent from the split.
  std::array<double, kNumClasses> per_class{};
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};  // [truth][predicted]
};

ValidationResult validate(const TrainedModel& model, const FeatureDataset& split);

inline constexpr int kModelFormatVersion = 1;

nlohmann::ordered_json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& doc);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);
std::string serialize_model(const TrainedModel& model);

}  // namespace drgrade
