#include "drgrade/extractor.hpp"

#include <algorithm>
#include <cmath>

#include "drgrade/error.hpp"
#include "drgrade/preprocess.hpp"

namespace drgrade {

FileExtractor::FileExtractor(const FeatureDataset& table) {
  table.validate();
  for (const auto& v : table.vectors) {
    const auto [it, inserted] = table_.emplace(v.source_id, v.values);
    require(inserted, ErrorKind::kInvalidArgument, "duplicate source id '" + v.source_id + "' in feature table");
  }
}

FileExtractor FileExtractor::from_csv(const std::filesystem::path& path) {
  return FileExtractor(load_features(path));
}

FeatureVector FileExtractor::extract(const RgbImage&, const std::string& source_id) const {
  const auto it = table_.find(source_id);
  if (it == table_.end()) {
    fail(ErrorKind::kMissingEntry, "feature table has no entry for '" + source_id + "'");
  }
  return {it->second, source_id};
}

FeatureVector ChannelStatsExtractor::extract(const RgbImage& img, const std::string& source_id) const {
  const BinaryMask field = fundus_mask(img);
  FeatureVector out;
  out.source_id = source_id;
  out.values.reserve(15);
  for (std::size_t c = 0; c < 3; ++c) {
    std::array<std::size_t, 256> hist{};
    std::size_t n = 0;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      if (!field.data()[i]) continue;
      const auto v = img.data()[3 * i + c];
      ++hist[v];
      ++n;
      sum += v;
      sum_sq += static_cast<double>(v) * v;
    }
    if (n == 0) {
      out.values.insert(out.values.end(), 5, 0.0);
      continue;
    }
    const double mean = sum / static_cast<double>(n);
    out.values.push_back(mean);
    out.values.push_back(std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean)));
    for (double q : {0.1, 0.5, 0.9}) {
      const auto rank = static_cast<std::size_t>(q * static_cast<double>(n - 1));
      std::size_t cum = 0;
      std::size_t v = 0;
      for (; v < 256; ++v) {
        cum += hist[v];
        if (cum > rank) break;
      }
      out.values.push_back(static_cast<double>(v));
    }
  }
  return out;
}

ConcatExtractor::ConcatExtractor(std::shared_ptr<const FeatureExtractor> first,
                                 std::shared_ptr<const FeatureExtractor> second)
    : first_(std::move(first)), second_(std::move(second)) {
  require(first_ && second_, ErrorKind::kInvalidArgument, "concat extractor needs two backends");
}

FeatureVector ConcatExtractor::extract(const RgbImage& img, const std::string& source_id) const {
  return concat_features(first_->extract(img, source_id), second_->extract(img, source_id));
}

std::string ConcatExtractor::name() const { return first_->name() + "+" + second_->name(); }

RgbImage resize_nearest(const RgbImage& img, std::uint32_t width, std::uint32_t height) {
  if (img.same_shape(width, height)) return img;
  RgbImage out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = y * img.height() / height;
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = x * img.width() / width;
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

#ifndef DRGRADE_HAS_ONNX
bool onnx_backend_available() noexcept { return false; }

std::shared_ptr<const FeatureExtractor> make_onnx_extractor(const OnnxExtractorOptions&) {
  fail(ErrorKind::kInference, "this build has no ONNX backend (configure with DRGRADE_WITH_ONNX and OpenCV dnn)");
}
#endif

}  // namespace drgrade
