#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "drgrade/classifiers.hpp"
#include "drgrade/ensemble.hpp"
#include "drgrade/extractor.hpp"
#include "drgrade/lesions.hpp"
#include "drgrade/preprocess.hpp"
#include "drgrade/trust.hpp"

namespace drgrade::pipeline {

enum class FeatureBackend { kFile, kChannelStats, kOnnx };

struct FeatureConfig {
  FeatureBackend backend = FeatureBackend::kChannelStats;
  std::filesystem::path csv;  // kFile
  OnnxExtractorOptions onnx;  // kOnnx
};

struct PipelineConfig {
  PreprocessParams preprocess;
  FeatureConfig features;
  // Read by grade; train writes its own output directory and never needs it.
  std::optional<std::filesystem::path> ensemble;
  Hyperparams hyperparams;
  WeightBasis weight_basis = WeightBasis::kPerClassAccuracy;
  LesionPolicy lesions;
  std::map<LesionKind, double> lesion_thresholds;  // per-kind override of lesions.fixed_threshold
  std::optional<std::filesystem::path> mask_dir;
  TrustWeights trust_weights;
  std::optional<std::filesystem::path> reference_image;
  std::optional<std::filesystem::path> lesion_metadata;
  std::uint64_t seed = 0;

  // The document as loaded, used for the fingerprint. Paths inside it are
  // kept as written.
  nlohmann::json document = nlohmann::json::object();

  LesionPolicy lesion_policy(LesionKind kind) const;
};

// Parses and validates a config document. Relative paths resolve against
// base_dir. Every error message starts with the JSON path of the offending
// field, e.g. "$.trust.weights.f1: expected a number".
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig default_config();

// FNV-1a 64 over the canonical dump of the config document, as 16 hex digits.
std::string config_fingerprint(const PipelineConfig& config);

std::string_view feature_backend_name(FeatureBackend backend) noexcept;

}  // namespace drgrade::pipeline
