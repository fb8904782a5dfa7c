#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include <cmath>
#include <mutex>

#include "drgrade/error.hpp"
#include "drgrade/extractor.hpp"

namespace drgrade {

namespace {

class OnnxExtractor final : public FeatureExtractor {
 public:
  explicit OnnxExtractor(const OnnxExtractorOptions& options) : options_(options) {
    require(options.input_width > 0 && options.input_height > 0, ErrorKind::kInvalidArgument,
            "ONNX input size must be positive");
    try {
      net_ = cv::dnn::readNetFromONNX(options.model_path.string());
    } catch (const cv::Exception& e) {
      fail(ErrorKind::kInference, "cannot load ONNX model '" + options.model_path.string() + "': " + e.what());
    }
    require(!net_.empty(), ErrorKind::kInference, "ONNX model '" + options.model_path.string() + "' is empty");
    net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
  }

  FeatureVector extract(const RgbImage& img, const std::string& source_id) const override {
    const RgbImage resized = resize_nearest(img, options_.input_width, options_.input_height);
    const int dims[4] = {1, 3, static_cast<int>(options_.input_height), static_cast<int>(options_.input_width)};
    cv::Mat blob(4, dims, CV_32F);
    float* dst = blob.ptr<float>();
    const std::size_t plane = resized.pixel_count();
    const auto src = resized.data();
    for (std::size_t i = 0; i < plane; ++i) {
      for (std::size_t c = 0; c < 3; ++c) dst[c * plane + i] = static_cast<float>(src[3 * i + c]) / 255.0f;
    }

    cv::Mat output;
    {
      // cv::dnn::Net::forward mutates internal buffers.
      std::lock_guard lock(mutex_);
      try {
        net_.setInput(blob);
        output = net_.forward().clone();
      } catch (const cv::Exception& e) {
        fail(ErrorKind::kInference, "ONNX inference failed for '" + source_id + "': " + e.what());
      }
    }
    require(output.depth() == CV_32F, ErrorKind::kInference, "ONNX output is not float32");
    FeatureVector fv;
    fv.source_id = source_id;
    fv.values.resize(output.total());
    const float* out = output.ptr<float>();
    for (std::size_t i = 0; i < fv.values.size(); ++i) {
      require(std::isfinite(out[i]), ErrorKind::kInference, "ONNX output for '" + source_id + "' is not finite");
      fv.values[i] = out[i];
    }
    return fv;
  }

  std::string name() const override { return "onnx"; }

 private:
  OnnxExtractorOptions options_;
  mutable cv::dnn::Net net_;
  mutable std::mutex mutex_;
};

}  // namespace

bool onnx_backend_available() noexcept { return true; }

std::shared_ptr<const FeatureExtractor> make_onnx_extractor(const OnnxExtractorOptions& options) {
  return std::make_shared<OnnxExtractor>(options);
}

}  // namespace drgrade
