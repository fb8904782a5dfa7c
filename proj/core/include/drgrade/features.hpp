#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drgrade {

// Three-level grade; numeric order is clinical severity.
enum class ClassLabel : std::uint8_t { kNoDR = 0, kMildDR = 1, kSevereDR = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::size_t kDefaultFeatureDim = 1056;
inline constexpr std::size_t kDefaultBlockDim = 528;

constexpr std::size_t index_of(ClassLabel label) noexcept { return static_cast<std::size_t>(label); }
constexpr ClassLabel label_at(std::size_t index) noexcept { return static_cast<ClassLabel>(index); }
std::string_view label_name(ClassLabel label) noexcept;
ClassLabel parse_label(std::string_view text);

// Five-grade clinical scale (0..4) onto the three-class scheme:
// 0 -> NoDR, 1-2 -> MildDR, 3-4 -> SevereDR.
ClassLabel collapse_grade(int grade);

// Index of the maximum score; exact ties go to the more severe class.
std::size_t severity_argmax(const std::array<double, kNumClasses>& scores) noexcept;

struct FeatureVector {
  std::vector<double> values;
  std::string source_id;

  std::size_t dimension() const noexcept { return values.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Per-dimension z-score standardisation.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::vector<double> transform(const std::vector<double>& x) const;
  std::vector<double> inverse(const std::vector<double>& z) const;
  friend bool operator==(const Scaler&, const Scaler&) = default;
};

struct FeatureDataset {
  std::vector<FeatureVector> vectors;
  std::vector<ClassLabel> labels;
  std::optional<Scaler> scaler;

  std::size_t size() const noexcept { return vectors.size(); }
  std::size_t dimension() const noexcept { return vectors.empty() ? 0 : vectors.front().dimension(); }
  std::array<std::size_t, kNumClasses> class_counts() const noexcept;
  // Throws unless |vectors| == |labels|, d is constant and all values finite.
  void validate() const;
};

// CSV with header "id,f0,...,f{d-1},label".
FeatureDataset load_features(const std::filesystem::path& path);
FeatureDataset parse_features(std::string_view text, const std::string& origin = "<memory>");
void save_features(const FeatureDataset& ds, const std::filesystem::path& path);
std::string format_features(const FeatureDataset& ds);

// Population statistics; std floored at 1e-12.
Scaler fit_scaler(const FeatureDataset& ds);
FeatureDataset apply_scaler(const FeatureDataset& ds, const Scaler& scaler);

FeatureVector concat_features(const FeatureVector& a, const FeatureVector& b);

// Stratified split: per class, the first round(fraction * n_c) shuffled rows
// go to the first dataset.
std::pair<FeatureDataset, FeatureDataset> stratified_split(const FeatureDataset& ds, double fraction,
                                                           std::uint64_t seed);

}  // namespace drgrade
