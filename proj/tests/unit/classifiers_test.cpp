#include <algorithm>
#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "drgrade/classifiers.hpp"
#include "drgrade/synthgen.hpp"
#include "support.hpp"

namespace drgrade {
namespace {

using test::expect_error;

Hyperparams quick_hp() {
  Hyperparams hp;
  hp.n_trees = 15;
  hp.epochs = 15;
  hp.support_budget = 300;
  return hp;
}

FeatureDataset standardized(const FeatureDataset& ds) { return apply_scaler(ds, fit_scaler(ds)); }

double training_accuracy(const TrainedModel& m, const FeatureDataset& ds) { return validate(m, ds).accuracy; }

// Two classes in 2-D separated by the line x0 = 0 with a gap of `margin`,
// plus a far-away third class so every label is present.
FeatureDataset margin_blobs(std::uint64_t seed, std::size_t n, double margin) {
  Rng rng(seed);
  FeatureDataset ds;
  std::size_t made = 0;
  while (made < n) {
    const double x0 = rng.normal(0.0, 2.0);
    if (std::abs(x0) < margin / 2.0) continue;
    ds.vectors.push_back({{x0, rng.normal(0.0, 2.0)}, "p" + std::to_string(made)});
    ds.labels.push_back(x0 < 0 ? ClassLabel::kNoDR : ClassLabel::kMildDR);
    ++made;
  }
  for (std::size_t k = 0; k < n / 4; ++k) {
    ds.vectors.push_back({{rng.normal(0.0, 0.5), 30.0 + rng.normal(0.0, 0.5)}, "q" + std::to_string(k)});
    ds.labels.push_back(ClassLabel::kSevereDR);
  }
  return ds;
}

TrainedModel constant_model(ClassLabel label, std::size_t d) {
  LinearParams p;
  for (auto& w : p.weights) w.assign(d, 0.0);
  p.bias[index_of(label)] = 1.0;
  return TrainedModel(ModelKind::kSvmLinear, {}, 0, d, p);
}

TEST(ModelKinds, NamesRoundTrip) {
  for (ModelKind k : kAllModelKinds) EXPECT_EQ(parse_model_kind(model_kind_name(k)), k);
  EXPECT_EQ(model_display_name(ModelKind::kSvmLinear), "SVM Linear Kernel");
  expect_error(ErrorKind::kInvalidArgument, [] { parse_model_kind("svm_quantum"); });
}

TEST(Hyperparams, DegenerateValuesRejected) {
  const auto bad = [](auto mutate) {
    Hyperparams hp;
    mutate(hp);
    expect_error(ErrorKind::kInvalidArgument, [&] { hp.validate(); });
  };
  bad([](Hyperparams& h) { h.c = 0.0; });
  bad([](Hyperparams& h) { h.poly_degree = 0; });
  bad([](Hyperparams& h) { h.gamma = -1.0; });
  bad([](Hyperparams& h) { h.n_trees = 0; });
  bad([](Hyperparams& h) { h.max_depth = 0; });
  bad([](Hyperparams& h) { h.epochs = 0; });
  bad([](Hyperparams& h) { h.learning_rate = 0.0; });
  EXPECT_NO_THROW(Hyperparams{}.validate());
}

TEST(Train, MissingClassAndEmptySplit) {
  FeatureDataset ds;
  ds.vectors = {{{0.0}, "a"}, {{1.0}, "b"}};
  ds.labels = {ClassLabel::kNoDR, ClassLabel::kMildDR};
  for (ModelKind k : kAllModelKinds) {
    expect_error(ErrorKind::kMissingClass, [&] { train(k, ds, {}, 1); });
    expect_error(ErrorKind::kEmptyInput, [&] { train(k, FeatureDataset{}, {}, 1); });
  }
}

TEST(LinearSvm, SeparableBlobsReachFullTrainingAccuracy) {
  const FeatureDataset raw = margin_blobs(31, 200, 2.0);
  // Separability oracle: every point of the two blobs lies at least margin/2
  // from the x0 = 0 line on its own side.
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw.labels[i] == ClassLabel::kSevereDR) continue;
    const double signed_gap = raw.labels[i] == ClassLabel::kMildDR ? raw.vectors[i].values[0] : -raw.vectors[i].values[0];
    ASSERT_GE(signed_gap, 1.0);
  }
  const FeatureDataset ds = standardized(raw);
  const TrainedModel m = train(ModelKind::kSvmLinear, ds, {}, 5);
  EXPECT_EQ(training_accuracy(m, ds), 1.0);
}

TEST(NaiveBayes, SymmetricGaussiansSplitNearZero) {
  Rng rng(32);
  FeatureDataset ds;
  for (std::size_t k = 0; k < 500; ++k) {
    ds.vectors.push_back({{rng.normal(-2.0, 1.0)}, "a"});
    ds.labels.push_back(ClassLabel::kNoDR);
    ds.vectors.push_back({{rng.normal(2.0, 1.0)}, "b"});
    ds.labels.push_back(ClassLabel::kMildDR);
    ds.vectors.push_back({{rng.normal(60.0, 1.0)}, "c"});
    ds.labels.push_back(ClassLabel::kSevereDR);
  }
  const TrainedModel m = train(ModelKind::kNaiveBayes, ds, {}, 1);
  // Scan for the point where the NoDR posterior stops dominating MildDR.
  double boundary = NAN;
  for (double x = -1.0; x <= 1.0; x += 1e-3) {
    const auto s = m.scores(std::vector<double>{x});
    if (s[1] >= s[0]) {
      boundary = x;
      break;
    }
  }
  ASSERT_FALSE(std::isnan(boundary));
  EXPECT_GE(boundary, -0.3);
  EXPECT_LE(boundary, 0.3);
}

TEST(NaiveBayes, PosteriorRowsSumToOne) {
  const FeatureDataset ds = standardized(gen_features(33, 40, 6, 3.0));
  const TrainedModel m = train(ModelKind::kNaiveBayes, ds, {}, 1);
  Rng rng(34);
  for (int k = 0; k < 500; ++k) {
    std::vector<double> x(6);
    for (auto& v : x) v = rng.normal(0.0, 3.0);
    const auto s = m.scores(x);
    EXPECT_NEAR(s[0] + s[1] + s[2], 1.0, 1e-9);
  }
}

TEST(RandomForest, SingleDeepTreeMemorizes) {
  Rng rng(35);
  FeatureDataset ds;
  for (std::size_t k = 0; k < 150; ++k) {
    ds.vectors.push_back({{rng.uniform(), rng.uniform(), rng.uniform()}, "r"});
    ds.labels.push_back(label_at(rng.below(3)));
  }
  Hyperparams hp;
  hp.n_trees = 1;
  hp.max_depth = 1000;
  const TrainedModel m = train(ModelKind::kRandomForest, ds, hp, 3);
  EXPECT_EQ(training_accuracy(m, ds), 1.0);
}

TEST(RandomForest, TreeOrderDoesNotMatter) {
  const FeatureDataset ds = standardized(gen_features(36, 30, 5, 2.0));
  Hyperparams hp = quick_hp();
  hp.n_trees = 12;
  const TrainedModel m = train(ModelKind::kRandomForest, ds, hp, 4);
  ForestParams shuffled = std::get<ForestParams>(m.parameters());
  Rng rng(37);
  rng.shuffle(std::span(shuffled.trees));
  std::reverse(shuffled.trees.begin(), shuffled.trees.end() - 3);
  const TrainedModel permuted(m.kind(), m.hyperparams(), m.seed(), m.dimension(), shuffled);
  for (int k = 0; k < 300; ++k) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.normal(0.0, 2.0);
    EXPECT_EQ(m.predict(x), permuted.predict(x));
  }
}

TEST(RandomForest, EvenVoteTieGoesToSevereClass) {
  ForestParams p;
  p.trees = {{TreeNode{-1, 0.0, -1, -1, ClassLabel::kNoDR}}, {TreeNode{-1, 0.0, -1, -1, ClassLabel::kSevereDR}}};
  const TrainedModel m(ModelKind::kRandomForest, {}, 0, 1, p);
  EXPECT_EQ(m.predict(std::vector<double>{0.0}), ClassLabel::kSevereDR);
}

TEST(Predict, ExactScoreTieGoesToSevereClass) {
  LinearParams p;
  for (auto& w : p.weights) w = {1.0, -1.0};
  p.bias = {0.0, 0.5, 0.5};
  const TrainedModel m(ModelKind::kSvmLinear, {}, 0, 2, p);
  EXPECT_EQ(m.predict(std::vector<double>{0.3, 0.3}), ClassLabel::kSevereDR);
  p.bias = {0.5, 0.5, 0.0};
  const TrainedModel m2(ModelKind::kSvmLinear, {}, 0, 2, p);
  EXPECT_EQ(m2.predict(std::vector<double>{0.3, 0.3}), ClassLabel::kMildDR);
}

TEST(Predict, DimensionMismatch) {
  const TrainedModel m = constant_model(ClassLabel::kNoDR, 4);
  expect_error(ErrorKind::kDimensionMismatch, [&] { m.predict(std::vector<double>{1.0, 2.0}); });
}

TEST(Predict, InteriorPointsKeepTheirLabel) {
  const FeatureDataset ds = standardized(gen_features(38, 60, 8, 8.0));
  for (ModelKind k : kAllModelKinds) {
    const TrainedModel m = train(k, ds, quick_hp(), 6);
    // Class means of the training data are deep inside their regions.
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      std::vector<double> mean(8, 0.0);
      std::size_t n = 0;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (index_of(ds.labels[i]) != c) continue;
        for (std::size_t j = 0; j < 8; ++j) mean[j] += ds.vectors[i].values[j];
        ++n;
      }
      for (auto& v : mean) v /= static_cast<double>(n);
      EXPECT_EQ(m.predict(mean), label_at(c)) << model_kind_name(k);
    }
  }
}

TEST(Validate, CountingContracts) {
  FeatureDataset ds;
  for (std::size_t k = 0; k < 30; ++k) {
    ds.vectors.push_back({{static_cast<double>(k)}, "v"});
    ds.labels.push_back(label_at(k % 3));
  }
  const ValidationResult r = validate(constant_model(ClassLabel::kNoDR, 1), ds);
  EXPECT_EQ(r.accuracy, 1.0 / 3.0);
  EXPECT_EQ(r.per_class, (std::array<double, 3>{1.0, 0.0, 0.0}));
  EXPECT_EQ(r.confusion[1][0], 10u);
  expect_error(ErrorKind::kEmptyInput, [] { validate(constant_model(ClassLabel::kNoDR, 1), FeatureDataset{}); });

  FeatureDataset only_no_dr;
  only_no_dr.vectors = {{{0.0}, "a"}};
  only_no_dr.labels = {ClassLabel::kNoDR};
  const ValidationResult perfect = validate(constant_model(ClassLabel::kNoDR, 1), only_no_dr);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_TRUE(std::isnan(perfect.per_class[2]));
}

TEST(Serialization, RoundTripPreservesPredictions) {
  const FeatureDataset ds = standardized(gen_features(39, 40, 6, 3.0));
  test::TempDir dir;
  Rng rng(40);
  for (ModelKind k : kAllModelKinds) {
    const TrainedModel m = train(k, ds, quick_hp(), 7);
    const auto path = dir / (std::string(model_kind_name(k)) + ".json");
    save_model(m, path);
    const TrainedModel back = load_model(path);
    EXPECT_EQ(back.kind(), k);
    EXPECT_EQ(back.hyperparams(), m.hyperparams());
    EXPECT_EQ(serialize_model(back), serialize_model(m));
    for (int probe = 0; probe < 1000; ++probe) {
      std::vector<double> x(6);
      for (auto& v : x) v = rng.normal(0.0, 3.0);
      ASSERT_EQ(back.scores(x), m.scores(x)) << model_kind_name(k);
    }
  }
}

TEST(Serialization, TruncatedAndNewerFilesRejected) {
  const FeatureDataset ds = standardized(gen_features(41, 20, 3, 4.0));
  const TrainedModel m = train(ModelKind::kNaiveBayes, ds, {}, 1);
  test::TempDir dir;
  const std::string text = serialize_model(m);
  {
    std::ofstream(dir / "cut.json") << text.substr(0, text.size() / 2);
  }
  expect_error(ErrorKind::kCorruptPayload, [&] { load_model(dir / "cut.json"); });

  nlohmann::json doc = nlohmann::json::parse(text);
  doc["format_version"] = kModelFormatVersion + 1;
  {
    std::ofstream(dir / "new.json") << doc.dump();
  }
  expect_error(ErrorKind::kVersionMismatch, [&] { load_model(dir / "new.json"); });
  expect_error(ErrorKind::kMissingFile, [&] { load_model(dir / "absent.json"); });
}

TEST(Determinism, SameSeedSameBytes) {
  const FeatureDataset ds = standardized(gen_features(42, 30, 5, 3.0));
  for (ModelKind k : kAllModelKinds) {
    EXPECT_EQ(serialize_model(train(k, ds, quick_hp(), 11)), serialize_model(train(k, ds, quick_hp(), 11)))
        << model_kind_name(k);
  }
}

TEST(LinearSvm, LossSettlesAfterThirdEpoch) {
  const FeatureDataset ds = standardized(gen_features(43, 100, 10, 4.0));
  TrainingTrace trace;
  Hyperparams hp;
  train(ModelKind::kSvmLinear, ds, hp, 8, &trace);
  ASSERT_EQ(trace.epoch_loss.size(), static_cast<std::size_t>(hp.epochs));
  for (std::size_t e = 3; e < trace.epoch_loss.size(); ++e) {
    EXPECT_LE(trace.epoch_loss[e], trace.epoch_loss[e - 1] * 1.05 + 1e-12) << "epoch " << e;
  }
}

TEST(CrammerSinger, KeepsUpWithOneVsRest) {
  for (std::uint64_t seed : {44u, 45u, 46u}) {
    const FeatureDataset ds = standardized(gen_features(seed, 80, 6, 6.0));
    const double ovr = training_accuracy(train(ModelKind::kSvmLinear, ds, {}, seed), ds);
    const double cs = training_accuracy(train(ModelKind::kSvmCrammerSinger, ds, {}, seed), ds);
    EXPECT_GE(cs, ovr - 0.02) << "seed " << seed;
  }
}

TEST(KernelValue, MatchesClosedForms) {
  KernelParams rbf;
  rbf.gamma = 0.5;
  const std::vector<double> a{1.0, 2.0}, b{0.0, 4.0};
  EXPECT_DOUBLE_EQ(kernel_value(rbf, a, b), std::exp(-0.5 * 5.0));
  KernelParams poly;
  poly.type = KernelType::kPolynomial;
  poly.gamma = 0.5;
  poly.degree = 3;
  poly.coef0 = 1.0;
  EXPECT_DOUBLE_EQ(kernel_value(poly, a, b), std::pow(0.5 * 8.0 + 1.0, 3));
}

TEST(Chance, NoSeparationStaysNearOneThird) {
  const FeatureDataset train_ds = standardized(gen_features(47, 150, 5, 0.0));
  const FeatureDataset val = standardized(gen_features(48, 150, 5, 0.0));
  for (ModelKind k : {ModelKind::kSvmLinear, ModelKind::kNaiveBayes, ModelKind::kSvmCrammerSinger}) {
    const double acc = validate(train(k, train_ds, {}, 9), val).accuracy;
    EXPECT_NEAR(acc, 1.0 / 3.0, 0.05) << model_kind_name(k);
  }
}

}  // namespace
}  // namespace drgrade
