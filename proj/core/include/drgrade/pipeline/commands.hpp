#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drgrade/classifiers.hpp"
#include "drgrade/ensemble.hpp"
#include "drgrade/extractor.hpp"
#include "drgrade/pipeline/config.hpp"
#include "drgrade/pipeline/report.hpp"

namespace drgrade::pipeline {

enum class OutputFormat { kJson, kText };

struct CommandContext {
  PipelineConfig config;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  OutputFormat format = OutputFormat::kText;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

// Every command returns a process exit status: 0 iff no item failed.

int cmd_preprocess(const CommandContext& ctx, const std::filesystem::path& in_dir,
                   const std::filesystem::path& out_dir);

// --- train -----------------------------------------------------------------

struct ModelMetrics {
  ModelKind kind = ModelKind::kSvmLinear;
  ValidationResult validation;
};

struct TrainOutcome {
  std::vector<std::shared_ptr<const TrainedModel>> models;  // kAllModelKinds order
  Scaler scaler;
  std::optional<EnsembleModel> ensemble;
  std::vector<ModelMetrics> metrics;
  ValidationResult ensemble_validation;
};

// Standardises both splits with a scaler fitted on `train`, trains the six
// classifiers (up to `jobs` at a time) and fits the ensemble weights on `val`.
TrainOutcome train_all(const FeatureDataset& train, const FeatureDataset& val, const Hyperparams& hp,
                       WeightBasis basis, std::uint64_t seed, unsigned jobs);

nlohmann::ordered_json metrics_to_json(const TrainOutcome& outcome);
std::string render_metrics_table(const TrainOutcome& outcome);

int cmd_train(const CommandContext& ctx, const std::filesystem::path& train_csv,
              const std::filesystem::path& val_csv, const std::filesystem::path& out_dir);

// --- grade -----------------------------------------------------------------

struct LesionQuality {
  std::optional<double> f1;
  std::optional<double> iou;
};

// Everything grade needs that is shared across images.
struct GradeResources {
  std::shared_ptr<const EnsembleModel> ensemble;
  std::optional<Scaler> scaler;
  std::shared_ptr<const FeatureExtractor> extractor;
  std::optional<GrayImage> reference;
  std::map<LesionKind, LesionQuality> lesion_quality;
};

// Loads the ensemble, extractor, reference image and lesion metadata named by
// the config. All missing inputs are listed in one error.
GradeResources load_grade_resources(const PipelineConfig& config);

std::map<LesionKind, LesionQuality> load_lesion_metadata(const std::filesystem::path& path);

struct GradeRequest {
  std::filesystem::path image;
  std::string source_id;
  std::filesystem::path mask_dir;
  std::optional<std::filesystem::path> overlay;  // PNG written when set
};

GradingReport grade_image(const PipelineConfig& config, const GradeResources& resources, const GradeRequest& request);

// Each lesion kind painted in its own colour over `base`.
RgbImage render_overlay(const RgbImage& base, const std::map<LesionKind, BinaryMask>& masks);

// `inputs` are image paths or source ids (looked up in the mask directory).
// Reports go to <out_dir>/<id>.report.json and, with overlays, <id>_overlay.png.
int cmd_grade(const CommandContext& ctx, const std::vector<std::string>& inputs,
              const std::optional<std::filesystem::path>& mask_dir, const std::filesystem::path& out_dir,
              bool overlays);

// --- evaluate --------------------------------------------------------------

struct KindMetrics {
  std::size_t images = 0;
  double iou = 1.0;  // pooled over all paired images
  double f1 = 1.0;
  KappaResult kappa;  // per-image presence vs absence
};

struct EvaluationResult {
  std::size_t pairs = 0;
  std::map<LesionKind, KindMetrics> per_kind;
  KappaResult overall_kappa;
  std::vector<std::string> unpaired;
  std::vector<std::string> errors;
};

// Pairs <id>_<KIND>.png (or .pfmap, binarised with the config policy) in
// pred_dir with <id>_<KIND>.png in truth_dir.
EvaluationResult evaluate_masks(const PipelineConfig& config, const std::filesystem::path& pred_dir,
                                const std::filesystem::path& truth_dir);
nlohmann::ordered_json evaluation_to_json(const EvaluationResult& result);

int cmd_evaluate(const CommandContext& ctx, const std::filesystem::path& pred_dir,
                 const std::filesystem::path& truth_dir, const std::optional<std::filesystem::path>& out_path);

// --- report ----------------------------------------------------------------

int cmd_report(const CommandContext& ctx, const std::filesystem::path& report_path);

// --- synthgen --------------------------------------------------------------

struct SynthgenOptions {
  std::uint32_t width = 256;
  std::uint32_t height = 256;
  std::size_t images_per_stage = 2;  // S0..S3
  std::size_t train_per_class = 150;
  std::size_t val_per_class = 50;
  std::size_t dimension = 20;
  double separation = 8.0;
};

// Writes a self-contained fixture tree: features/{train,val,images}.csv,
// images/ (fundus, masks, probability maps), reference.png,
// lesion_metadata.json and a config.json wired to all of them.
int cmd_synthgen(const CommandContext& ctx, const std::filesystem::path& out_dir, const SynthgenOptions& options);

}  // namespace drgrade::pipeline
