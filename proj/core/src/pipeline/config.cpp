#include "drgrade/pipeline/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "drgrade/error.hpp"

namespace drgrade::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A view of one JSON object that knows its own path, so every error can say
// exactly which field was wrong. Unknown keys are rejected.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad("expected an object");
  }

  ~Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [key, value] : j_.items()) {
      if (!known.count(key)) fail(ErrorKind::kConfig, path_ + "." + key + ": unknown field");
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  Node child(const char* key) const { return Node(j_.at(key), path_ + "." + key); }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(ErrorKind::kConfig, at(key) + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(ErrorKind::kConfig, at(key) + ": expected a finite number");
    return d;
  }

  double positive(const char* key, double fallback) const {
    const double d = number(key, fallback);
    if (!(d > 0.0)) fail(ErrorKind::kConfig, at(key) + ": expected a number > 0");
    return d;
  }

  long long integer(const char* key, long long fallback, long long lo) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(ErrorKind::kConfig, at(key) + ": expected an integer");
    const auto i = v.get<long long>();
    if (i < lo) fail(ErrorKind::kConfig, at(key) + ": expected an integer >= " + std::to_string(lo));
    return i;
  }

  std::string text(const char* key, std::string fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(ErrorKind::kConfig, at(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::optional<fs::path> existing_path(const char* key, const fs::path& base) const {
    if (!has(key)) return std::nullopt;
    const fs::path p = resolve(text(key, ""), base);
    if (!fs::exists(p)) fail(ErrorKind::kConfig, at(key) + ": path '" + p.string() + "' does not exist");
    return p;
  }

  std::optional<fs::path> any_path(const char* key, const fs::path& base) const {
    if (!has(key)) return std::nullopt;
    return resolve(text(key, ""), base);
  }

  std::array<double, 3> triple(const char* key) const {
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) fail(ErrorKind::kConfig, at(key) + ": expected an array of 3 numbers");
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_number()) fail(ErrorKind::kConfig, at(key) + "[" + std::to_string(i) + "]: expected a number");
      out[i] = v[i].get<double>();
    }
    return out;
  }

  std::string at(const char* key) const { return path_ + "." + key; }
  [[noreturn]] void bad(const std::string& what) const { fail(ErrorKind::kConfig, path_ + ": " + what); }

 private:
  static fs::path resolve(const std::string& p, const fs::path& base) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
  }

  const json& j_;
  std::string path_;
};

void parse_preprocess(const Node& n, PreprocessParams& p) {
  n.allow({"clahe", "color_reference", "gaussian", "disc_dilate_px", "vessel_window"});
  if (n.has("clahe")) {
    const Node c = n.child("clahe");
    c.allow({"clip_limit", "tile_grid"});
    p.clahe.clip_limit = c.positive("clip_limit", p.clahe.clip_limit);
    p.clahe.tile_grid = static_cast<int>(c.integer("tile_grid", p.clahe.tile_grid, 1));
  }
  if (n.has("color_reference")) {
    const Node c = n.child("color_reference");
    c.allow({"mean", "std"});
    ColorStats stats;
    stats.mean = c.triple("mean");
    stats.stddev = c.triple("std");
    for (double s : stats.stddev) {
      if (!(s > 0.0)) fail(ErrorKind::kConfig, c.at("std") + ": reference standard deviations must be > 0");
    }
    p.color_reference = stats;
  }
  if (n.has("gaussian")) {
    const Node g = n.child("gaussian");
    g.allow({"sigma_x", "sigma_y", "mu_x", "mu_y", "radius_a", "radius_b"});
    p.gaussian.sigma_x = g.positive("sigma_x", p.gaussian.sigma_x);
    p.gaussian.sigma_y = g.positive("sigma_y", p.gaussian.sigma_y);
    p.gaussian.mu_x = g.number("mu_x", p.gaussian.mu_x);
    p.gaussian.mu_y = g.number("mu_y", p.gaussian.mu_y);
    p.gaussian.radius_a = static_cast<int>(g.integer("radius_a", p.gaussian.radius_a, 0));
    p.gaussian.radius_b = static_cast<int>(g.integer("radius_b", p.gaussian.radius_b, 0));
  }
  p.disc_dilate_px = static_cast<int>(n.integer("disc_dilate_px", p.disc_dilate_px, 0));
  p.vessel_window = static_cast<int>(n.integer("vessel_window", p.vessel_window, 1));
  if (p.vessel_window % 2 == 0) fail(ErrorKind::kConfig, n.at("vessel_window") + ": expected an odd window");
}

void parse_features(const Node& n, FeatureConfig& f, const fs::path& base) {
  n.allow({"backend", "csv", "onnx_model", "input_width", "input_height"});
  const std::string backend = n.text("backend", "channel-stats");
  if (backend == "file") {
    f.backend = FeatureBackend::kFile;
    if (!n.has("csv")) n.bad("backend 'file' needs a 'csv' path");
    f.csv = *n.existing_path("csv", base);
  } else if (backend == "channel-stats") {
    f.backend = FeatureBackend::kChannelStats;
  } else if (backend == "onnx") {
    f.backend = FeatureBackend::kOnnx;
    if (!n.has("onnx_model")) n.bad("backend 'onnx' needs an 'onnx_model' path");
    f.onnx.model_path = *n.existing_path("onnx_model", base);
  } else {
    fail(ErrorKind::kConfig, n.at("backend") + ": unknown backend '" + backend +
                                 "' (expected file, channel-stats or onnx)");
  }
  f.onnx.input_width = static_cast<std::uint32_t>(n.integer("input_width", f.onnx.input_width, 1));
  f.onnx.input_height = static_cast<std::uint32_t>(n.integer("input_height", f.onnx.input_height, 1));
}

void parse_models(const Node& n, PipelineConfig& cfg, const fs::path& base) {
  n.allow({"ensemble", "weight_basis", "hyperparams"});
  cfg.ensemble = n.any_path("ensemble", base);
  if (n.has("weight_basis")) {
    try {
      cfg.weight_basis = parse_weight_basis(n.text("weight_basis", ""));
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, n.at("weight_basis") + ": " + e.what());
    }
  }
  if (n.has("hyperparams")) {
    const Node h = n.child("hyperparams");
    h.allow({"c", "poly_degree", "poly_coef0", "gamma", "n_trees", "max_depth", "epochs", "learning_rate",
             "support_budget"});
    Hyperparams& hp = cfg.hyperparams;
    hp.c = h.positive("c", hp.c);
    hp.poly_degree = static_cast<int>(h.integer("poly_degree", hp.poly_degree, 1));
    hp.poly_coef0 = h.number("poly_coef0", hp.poly_coef0);
    if (h.has("gamma")) hp.gamma = h.positive("gamma", 1.0);
    hp.n_trees = static_cast<int>(h.integer("n_trees", hp.n_trees, 1));
    hp.max_depth = static_cast<int>(h.integer("max_depth", hp.max_depth, 1));
    hp.epochs = static_cast<int>(h.integer("epochs", hp.epochs, 1));
    hp.learning_rate = h.positive("learning_rate", hp.learning_rate);
    hp.support_budget = static_cast<std::size_t>(
        h.integer("support_budget", static_cast<long long>(hp.support_budget), 1));
  }
}

void parse_lesions(const Node& n, PipelineConfig& cfg, const fs::path& base) {
  n.allow({"threshold", "thresholds", "min_area", "mask_dir"});
  const auto unit = [](const Node& node, const char* key) {
    const double t = node.number(key, 0.5);
    if (t < 0.0 || t > 1.0) fail(ErrorKind::kConfig, node.at(key) + ": expected a value in [0, 1]");
    return t;
  };
  if (n.has("threshold")) cfg.lesions.fixed_threshold = unit(n, "threshold");
  if (n.has("thresholds")) {
    const Node t = n.child("thresholds");
    t.allow({"MA", "HEM", "SE", "HE"});
    for (auto kind : kAllLesionKinds) {
      const std::string code(lesion_code(kind));
      if (t.has(code.c_str())) cfg.lesion_thresholds[kind] = unit(t, code.c_str());
    }
  }
  cfg.lesions.min_area =
      static_cast<std::size_t>(n.integer("min_area", static_cast<long long>(cfg.lesions.min_area), 1));
  cfg.mask_dir = n.existing_path("mask_dir", base);
}

void parse_trust(const Node& n, PipelineConfig& cfg, const fs::path& base) {
  n.allow({"weights", "reference_image", "metadata"});
  if (n.has("weights")) {
    const Node w = n.child("weights");
    w.allow({"quality", "f1", "confidence"});
    TrustWeights& tw = cfg.trust_weights;
    tw.quality = w.number("quality", tw.quality);
    tw.f1 = w.number("f1", tw.f1);
    tw.confidence = w.number("confidence", tw.confidence);
    try {
      tw.validate();
    } catch (const Error& e) {
      w.bad(e.what());
    }
  }
  cfg.reference_image = n.existing_path("reference_image", base);
  cfg.lesion_metadata = n.existing_path("metadata", base);
}

}  // namespace

LesionPolicy PipelineConfig::lesion_policy(LesionKind kind) const {
  LesionPolicy p = lesions;
  if (const auto it = lesion_thresholds.find(kind); it != lesion_thresholds.end()) p.fixed_threshold = it->second;
  return p;
}

std::string_view feature_backend_name(FeatureBackend backend) noexcept {
  switch (backend) {
    case FeatureBackend::kFile: return "file";
    case FeatureBackend::kChannelStats: return "channel-stats";
    case FeatureBackend::kOnnx: return "onnx";
  }
  return "?";
}

PipelineConfig parse_config(const json& doc, const fs::path& base_dir) {
  PipelineConfig cfg;
  const Node root(doc, "$");
  root.allow({"seed", "preprocess", "features", "models", "lesions", "trust"});
  if (root.has("seed")) {
    const json& s = doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      fail(ErrorKind::kConfig, "$.seed: expected a non-negative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  if (root.has("preprocess")) parse_preprocess(root.child("preprocess"), cfg.preprocess);
  if (root.has("features")) parse_features(root.child("features"), cfg.features, base_dir);
  if (root.has("models")) parse_models(root.child("models"), cfg, base_dir);
  if (root.has("lesions")) parse_lesions(root.child("lesions"), cfg, base_dir);
  if (root.has("trust")) parse_trust(root.child("trust"), cfg, base_dir);
  cfg.document = doc;
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kMissingFile, "cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, "$: config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

PipelineConfig default_config() { return parse_config(json::object(), fs::current_path()); }

std::string config_fingerprint(const PipelineConfig& config) {
  // nlohmann::json keeps object keys sorted, so the dump is canonical.
  const std::string text = config.document.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace drgrade::pipeline
