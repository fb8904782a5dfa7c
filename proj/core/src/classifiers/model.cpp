#include <cmath>
#include <limits>

#include "drgrade/classifiers.hpp"
#include "drgrade/error.hpp"
#include "drgrade/imgio.hpp"
#include "trainers.hpp"

namespace drgrade {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct KindInfo {
  ModelKind kind;
  std::string_view name;
  std::string_view display;
};

constexpr std::array<KindInfo, 6> kKinds = {{
    {ModelKind::kSvmLinear, "svm_linear", "SVM Linear Kernel"},
    {ModelKind::kSvmPoly, "svm_poly", "SVM Polynomial Kernel"},
    {ModelKind::kSvmRbf, "svm_rbf", "SVM Radial Basis Kernel"},
    {ModelKind::kSvmCrammerSinger, "svm_crammer_singer", "SVM Crammer-Singer"},
    {ModelKind::kRandomForest, "random_forest", "Random Forest"},
    {ModelKind::kNaiveBayes, "naive_bayes", "Naive Bayes"},
}};

void check_parameters_match(ModelKind kind, const TrainedModel::Parameters& p) {
  bool ok = false;
  switch (kind) {
    case ModelKind::kSvmLinear:
    case ModelKind::kSvmCrammerSinger: ok = std::holds_alternative<LinearParams>(p); break;
    case ModelKind::kSvmPoly:
    case ModelKind::kSvmRbf: ok = std::holds_alternative<KernelParams>(p); break;
    case ModelKind::kRandomForest: ok = std::holds_alternative<ForestParams>(p); break;
    case ModelKind::kNaiveBayes: ok = std::holds_alternative<NaiveBayesParams>(p); break;
  }
  require(ok, ErrorKind::kInvalidArgument, "parameters do not match model kind " + std::string(model_kind_name(kind)));
}

ordered_json hyperparams_json(const Hyperparams& hp) {
  ordered_json j;
  j["c"] = hp.c;
  j["poly_degree"] = hp.poly_degree;
  j["poly_coef0"] = hp.poly_coef0;
  j["gamma"] = hp.gamma ? json(*hp.gamma) : json(nullptr);
  j["n_trees"] = hp.n_trees;
  j["max_depth"] = hp.max_depth;
  j["epochs"] = hp.epochs;
  j["learning_rate"] = hp.learning_rate;
  j["support_budget"] = hp.support_budget;
  return j;
}

Hyperparams hyperparams_from(const json& j) {
  Hyperparams hp;
  hp.c = j.at("c").get<double>();
  hp.poly_degree = j.at("poly_degree").get<int>();
  hp.poly_coef0 = j.at("poly_coef0").get<double>();
  if (!j.at("gamma").is_null()) hp.gamma = j.at("gamma").get<double>();
  hp.n_trees = j.at("n_trees").get<int>();
  hp.max_depth = j.at("max_depth").get<int>();
  hp.epochs = j.at("epochs").get<int>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.support_budget = j.at("support_budget").get<std::size_t>();
  return hp;
}

template <typename T>
std::array<T, kNumClasses> triple(const json& j) {
  require(j.is_array() && j.size() == kNumClasses, ErrorKind::kCorruptPayload, "expected a 3-element array");
  return {j[0].get<T>(), j[1].get<T>(), j[2].get<T>()};
}

void require_dim(const std::vector<double>& v, std::size_t d) {
  require(v.size() == d, ErrorKind::kCorruptPayload,
          "parameter vector has dimension " + std::to_string(v.size()) + ", expected " + std::to_string(d));
}

ordered_json parameters_json(const TrainedModel::Parameters& params) {
  return std::visit(
      [](const auto& p) -> ordered_json {
        using P = std::decay_t<decltype(p)>;
        ordered_json j;
        if constexpr (std::is_same_v<P, LinearParams>) {
          j["weights"] = p.weights;
          j["bias"] = p.bias;
        } else if constexpr (std::is_same_v<P, KernelParams>) {
          j["kernel"] = p.type == KernelType::kRbf ? "rbf" : "polynomial";
          j["gamma"] = p.gamma;
          j["degree"] = p.degree;
          j["coef0"] = p.coef0;
          j["machines"] = ordered_json::array();
          for (const auto& m : p.machines) {
            ordered_json mj;
            mj["support"] = m.support;
            mj["coef"] = m.coef;
            mj["bias"] = m.bias;
            j["machines"].push_back(std::move(mj));
          }
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          j["trees"] = ordered_json::array();
          for (const auto& tree : p.trees) {
            ordered_json tj;
            std::vector<int> feature, left, right, label;
            std::vector<double> threshold;
            for (const auto& n : tree) {
              feature.push_back(n.feature);
              threshold.push_back(n.threshold);
              left.push_back(n.left);
              right.push_back(n.right);
              label.push_back(static_cast<int>(n.label));
            }
            tj["feature"] = feature;
            tj["threshold"] = threshold;
            tj["left"] = left;
            tj["right"] = right;
            tj["label"] = label;
            j["trees"].push_back(std::move(tj));
          }
        } else {
          j["log_prior"] = p.log_prior;
          j["mean"] = p.mean;
          j["variance"] = p.variance;
        }
        return j;
      },
      params);
}

TrainedModel::Parameters parameters_from(ModelKind kind, const json& j, std::size_t d) {
  switch (kind) {
    case ModelKind::kSvmLinear:
    case ModelKind::kSvmCrammerSinger: {
      LinearParams p;
      p.weights = triple<std::vector<double>>(j.at("weights"));
      p.bias = triple<double>(j.at("bias"));
      for (const auto& w : p.weights) require_dim(w, d);
      return p;
    }
    case ModelKind::kSvmPoly:
    case ModelKind::kSvmRbf: {
      KernelParams p;
      const auto type = j.at("kernel").get<std::string>();
      require(type == "rbf" || type == "polynomial", ErrorKind::kCorruptPayload, "unknown kernel '" + type + "'");
      p.type = type == "rbf" ? KernelType::kRbf : KernelType::kPolynomial;
      p.gamma = j.at("gamma").get<double>();
      p.degree = j.at("degree").get<int>();
      p.coef0 = j.at("coef0").get<double>();
      const auto& machines = j.at("machines");
      require(machines.is_array() && machines.size() == kNumClasses, ErrorKind::kCorruptPayload,
              "kernel model needs 3 machines");
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        auto& m = p.machines[c];
        m.support = machines[c].at("support").get<std::vector<std::vector<double>>>();
        m.coef = machines[c].at("coef").get<std::vector<double>>();
        m.bias = machines[c].at("bias").get<double>();
        require(m.support.size() == m.coef.size(), ErrorKind::kCorruptPayload, "support/coef length mismatch");
        for (const auto& s : m.support) require_dim(s, d);
      }
      return p;
    }
    case ModelKind::kRandomForest: {
      ForestParams p;
      for (const auto& tj : j.at("trees")) {
        const auto feature = tj.at("feature").get<std::vector<int>>();
        const auto threshold = tj.at("threshold").get<std::vector<double>>();
        const auto left = tj.at("left").get<std::vector<int>>();
        const auto right = tj.at("right").get<std::vector<int>>();
        const auto label = tj.at("label").get<std::vector<int>>();
        const std::size_t n = feature.size();
        require(n > 0 && threshold.size() == n && left.size() == n && right.size() == n && label.size() == n,
                ErrorKind::kCorruptPayload, "inconsistent tree arrays");
        std::vector<TreeNode> tree(n);
        for (std::size_t k = 0; k < n; ++k) {
          const bool leaf = feature[k] < 0;
          require(leaf || (feature[k] < static_cast<int>(d) && left[k] > static_cast<int>(k) &&
                           right[k] > static_cast<int>(k) && left[k] < static_cast<int>(n) &&
                           right[k] < static_cast<int>(n)),
                  ErrorKind::kCorruptPayload, "tree node " + std::to_string(k) + " has invalid links");
          require(label[k] >= 0 && label[k] < static_cast<int>(kNumClasses), ErrorKind::kCorruptPayload,
                  "tree node label out of range");
          tree[k] = {feature[k], threshold[k], left[k], right[k], label_at(static_cast<std::size_t>(label[k]))};
        }
        p.trees.push_back(std::move(tree));
      }
      require(!p.trees.empty(), ErrorKind::kCorruptPayload, "forest has no trees");
      return p;
    }
    case ModelKind::kNaiveBayes: {
      NaiveBayesParams p;
      p.log_prior = triple<double>(j.at("log_prior"));
      p.mean = triple<std::vector<double>>(j.at("mean"));
      p.variance = triple<std::vector<double>>(j.at("variance"));
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        require_dim(p.mean[c], d);
        require_dim(p.variance[c], d);
      }
      return p;
    }
  }
  fail(ErrorKind::kCorruptPayload, "unknown model kind");
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) noexcept {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "?";
}

std::string_view model_display_name(ModelKind kind) noexcept {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.display;
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  fail(ErrorKind::kInvalidArgument, "unknown model kind '" + std::string(name) + "'");
}

void Hyperparams::validate() const {
  auto check = [](bool ok, const char* what) {
    require(ok, ErrorKind::kInvalidArgument, std::string("degenerate hyperparameter: ") + what);
  };
  check(c > 0.0 && std::isfinite(c), "C must be > 0");
  check(poly_degree >= 1, "poly_degree must be >= 1");
  check(std::isfinite(poly_coef0), "poly_coef0 must be finite");
  check(!gamma || (*gamma > 0.0 && std::isfinite(*gamma)), "gamma must be > 0");
  check(n_trees >= 1, "n_trees must be >= 1");
  check(max_depth >= 1, "max_depth must be >= 1");
  check(epochs >= 1, "epochs must be >= 1");
  check(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be > 0");
  check(support_budget >= 1, "support_budget must be >= 1");
}

double kernel_value(const KernelParams& params, std::span<const double> a, std::span<const double> b) noexcept {
  if (params.type == KernelType::kRbf) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = a[i] - b[i];
      sq += diff * diff;
    }
    return std::exp(-params.gamma * sq);
  }
  return std::pow(params.gamma * detail::dot(a, b) + params.coef0, params.degree);
}

TrainedModel::TrainedModel(ModelKind kind, Hyperparams hp, std::uint64_t seed, std::size_t dimension,
                           Parameters parameters)
    : kind_(kind), hp_(std::move(hp)), seed_(seed), dimension_(dimension), parameters_(std::move(parameters)) {
  check_parameters_match(kind_, parameters_);
}

std::array<double, kNumClasses> TrainedModel::scores(std::span<const double> x) const {
  require(x.size() == dimension_, ErrorKind::kDimensionMismatch,
          "model expects dimension " + std::to_string(dimension_) + ", got " + std::to_string(x.size()));
  return std::visit(
      [&](const auto& p) -> std::array<double, kNumClasses> {
        using P = std::decay_t<decltype(p)>;
        std::array<double, kNumClasses> s{};
        if constexpr (std::is_same_v<P, LinearParams>) {
          for (std::size_t c = 0; c < kNumClasses; ++c) s[c] = detail::dot(p.weights[c], x) + p.bias[c];
        } else if constexpr (std::is_same_v<P, KernelParams>) {
          for (std::size_t c = 0; c < kNumClasses; ++c) {
            const auto& m = p.machines[c];
            double acc = m.bias;
            for (std::size_t j = 0; j < m.support.size(); ++j) acc += m.coef[j] * kernel_value(p, m.support[j], x);
            s[c] = acc;
          }
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          s = detail::forest_votes(p, x);
        } else {
          s = detail::naive_bayes_posterior(p, x);
        }
        return s;
      },
      parameters_);
}

ClassLabel TrainedModel::predict(std::span<const double> x) const {
  return label_at(severity_argmax(scores(x)));
}

TrainedModel train(ModelKind kind, const FeatureDataset& ds, const Hyperparams& hp, std::uint64_t seed,
                   TrainingTrace* trace) {
  hp.validate();
  require(ds.size() > 0, ErrorKind::kEmptyInput, "training split is empty");
  ds.validate();
  require(ds.dimension() > 0, ErrorKind::kInvalidArgument, "training features have dimension 0");
  const auto counts = ds.class_counts();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    require(counts[c] > 0, ErrorKind::kMissingClass,
            "training split has no samples of class " + std::string(label_name(label_at(c))));
  }
  const detail::Matrix x = detail::to_matrix(ds);
  const std::vector<std::size_t> y = detail::label_indices(ds);
  Hyperparams resolved = hp;
  if (!resolved.gamma) resolved.gamma = 1.0 / static_cast<double>(x.cols);
  Rng rng(seed);

  TrainedModel::Parameters params;
  switch (kind) {
    case ModelKind::kSvmLinear: params = detail::train_linear_ovr(x, y, resolved, rng, trace); break;
    case ModelKind::kSvmCrammerSinger: params = detail::train_crammer_singer(x, y, resolved, rng, trace); break;
    case ModelKind::kSvmPoly: params = detail::train_kernel_ovr(KernelType::kPolynomial, x, y, resolved, rng); break;
    case ModelKind::kSvmRbf: params = detail::train_kernel_ovr(KernelType::kRbf, x, y, resolved, rng); break;
    case ModelKind::kRandomForest: params = detail::train_forest(x, y, resolved, seed); break;
    case ModelKind::kNaiveBayes: params = detail::train_naive_bayes(x, y); break;
  }
  return TrainedModel(kind, resolved, seed, x.cols, std::move(params));
}

ValidationResult validate(const TrainedModel& model, const FeatureDataset& split) {
  require(split.size() > 0, ErrorKind::kEmptyInput, "validation split is empty");
  split.validate();
  ValidationResult r;
  std::array<std::size_t, kNumClasses> totals{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const std::size_t truth = index_of(split.labels[i]);
    const std::size_t pred = index_of(model.predict(split.vectors[i]));
    ++r.confusion[truth][pred];
    ++totals[truth];
    correct += truth == pred;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(split.size());
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    r.per_class[c] = totals[c] == 0 ? std::numeric_limits<double>::quiet_NaN()
                                    : static_cast<double>(r.confusion[c][c]) / static_cast<double>(totals[c]);
  }
  return r;
}

ordered_json model_to_json(const TrainedModel& model) {
  ordered_json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["kind"] = model_kind_name(model.kind());
  doc["hyperparams"] = hyperparams_json(model.hyperparams());
  doc["seed"] = model.seed();
  doc["dimension"] = model.dimension();
  doc["parameters"] = parameters_json(model.parameters());
  return doc;
}

TrainedModel model_from_json(const json& doc) {
  require(doc.is_object(), ErrorKind::kCorruptPayload, "model document is not a JSON object");
  try {
    const int version = doc.at("format_version").get<int>();
    require(version == kModelFormatVersion, ErrorKind::kVersionMismatch,
            "model format version " + std::to_string(version) + " is not supported (expected " +
                std::to_string(kModelFormatVersion) + ")");
    const ModelKind kind = parse_model_kind(doc.at("kind").get<std::string>());
    Hyperparams hp = hyperparams_from(doc.at("hyperparams"));
    hp.validate();
    const auto seed = doc.at("seed").get<std::uint64_t>();
    const auto d = doc.at("dimension").get<std::size_t>();
    require(d > 0, ErrorKind::kCorruptPayload, "model dimension is 0");
    return TrainedModel(kind, hp, seed, d, parameters_from(kind, doc.at("parameters"), d));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kVersionMismatch || e.kind() == ErrorKind::kCorruptPayload) throw;
    fail(ErrorKind::kCorruptPayload, std::string("invalid model document: ") + e.what());
  } catch (const json::exception& e) {
    fail(ErrorKind::kCorruptPayload, std::string("invalid model document: ") + e.what());
  }
}

std::string serialize_model(const TrainedModel& model) { return model_to_json(model).dump(1) + "\n"; }

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  const std::string text = serialize_model(model);
  write_file_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

TrainedModel load_model(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  json doc;
  try {
    doc = json::parse(reinterpret_cast<const char*>(bytes.data()),
                      reinterpret_cast<const char*>(bytes.data()) + bytes.size());
  } catch (const json::exception& e) {
    fail(ErrorKind::kCorruptPayload, "corrupt model file '" + path.string() + "': " + e.what());
  }
  try {
    return model_from_json(doc);
  } catch (const Error& e) {
    fail(e.kind(), std::string(e.what()) + " ('" + path.string() + "')");
  }
}

namespace detail {

Matrix to_matrix(const FeatureDataset& ds) {
  Matrix m;
  m.rows = ds.size();
  m.cols = ds.dimension();
  m.data.reserve(m.rows * m.cols);
  for (const auto& v : ds.vectors) m.data.insert(m.data.end(), v.values.begin(), v.values.end());
  return m;
}

std::vector<std::size_t> label_indices(const FeatureDataset& ds) {
  std::vector<std::size_t> y;
  y.reserve(ds.size());
  for (auto l : ds.labels) y.push_back(index_of(l));
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

}  // namespace drgrade
