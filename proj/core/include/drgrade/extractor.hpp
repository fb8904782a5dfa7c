#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "drgrade/features.hpp"
#include "drgrade/image.hpp"

namespace drgrade {

// Boundary to whatever produces feature vectors for an image. Implementations
// must be safe for concurrent const calls.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureVector extract(const RgbImage& img, const std::string& source_id) const = 0;
  virtual std::string name() const = 0;
};

// Looks vectors up by source id from a precomputed table.
class FileExtractor final : public FeatureExtractor {
 public:
  explicit FileExtractor(const FeatureDataset& table);
  static FileExtractor from_csv(const std::filesystem::path& path);

  FeatureVector extract(const RgbImage& img, const std::string& source_id) const override;
  std::string name() const override { return "file"; }
  std::size_t size() const noexcept { return table_.size(); }

 private:
  std::map<std::string, std::vector<double>, std::less<>> table_;
};

// Per-channel distribution statistics over the fundus field: mean, standard
// deviation and the 10th/50th/90th percentiles for R, G and B (15 values).
class ChannelStatsExtractor final : public FeatureExtractor {
 public:
  FeatureVector extract(const RgbImage& img, const std::string& source_id) const override;
  std::string name() const override { return "channel-stats"; }
};

// Runs two extractors and concatenates their outputs (first block, then second).
class ConcatExtractor final : public FeatureExtractor {
 public:
  ConcatExtractor(std::shared_ptr<const FeatureExtractor> first,
                  std::shared_ptr<const FeatureExtractor> second);
  FeatureVector extract(const RgbImage& img, const std::string& source_id) const override;
  std::string name() const override;

 private:
  std::shared_ptr<const FeatureExtractor> first_;
  std::shared_ptr<const FeatureExtractor> second_;
};

struct OnnxExtractorOptions {
  std::filesystem::path model_path;
  // Images are resized (nearest neighbour) to this input size.
  std::uint32_t input_width = 224;
  std::uint32_t input_height = 224;
};

bool onnx_backend_available() noexcept;

// Exported network with one float input 1x3xHxW in [0,1] and one d-vector
// output. Throws Error(kInference) when the backend is not compiled in or the
// model cannot be loaded.
std::shared_ptr<const FeatureExtractor> make_onnx_extractor(const OnnxExtractorOptions& options);

RgbImage resize_nearest(const RgbImage& img, std::uint32_t width, std::uint32_t height);

}  // namespace drgrade
