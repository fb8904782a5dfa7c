#include <gtest/gtest.h>

#include "drgrade/ensemble.hpp"
#include "drgrade/synthgen.hpp"
#include "support.hpp"

namespace drgrade {
namespace {

using test::expect_error;

using ModelPtr = std::shared_ptr<const TrainedModel>;

// 1-D model predicting `label` for every input.
ModelPtr constant_member(ClassLabel label) {
  LinearParams p;
  for (auto& w : p.weights) w = {0.0};
  p.bias[index_of(label)] = 1.0;
  return std::make_shared<TrainedModel>(ModelKind::kSvmLinear, Hyperparams{}, 0, 1, p);
}

// 1-D model predicting `neg` for x < 0 and `pos` otherwise.
ModelPtr step_member(ClassLabel neg, ClassLabel pos) {
  LinearParams p;
  for (auto& w : p.weights) w = {0.0};
  p.weights[index_of(pos)] = {1.0};
  p.weights[index_of(neg)] = {-1.0};
  p.bias[index_of(pos)] = 1e-9;
  return std::make_shared<TrainedModel>(ModelKind::kSvmLinear, Hyperparams{}, 0, 1, p);
}

MemberWeights flat(double w) { return {{w, w, w}}; }

const std::vector<double> kProbe{0.0};

TEST(Vote, HandSummedExample) {
  const EnsembleModel e({constant_member(ClassLabel::kNoDR), constant_member(ClassLabel::kMildDR),
                         constant_member(ClassLabel::kMildDR)},
                        {flat(0.5), flat(0.3), flat(0.3)}, WeightBasis::kOverallAccuracy);
  const VoteResult r = vote(e, kProbe);
  EXPECT_EQ(r.label, ClassLabel::kMildDR);
  EXPECT_DOUBLE_EQ(r.scores[0], 0.5);
  EXPECT_DOUBLE_EQ(r.scores[1], 0.6);
  EXPECT_EQ(r.scores[2], 0.0);
  EXPECT_EQ(r.member_votes, (std::vector<ClassLabel>{ClassLabel::kNoDR, ClassLabel::kMildDR, ClassLabel::kMildDR}));
}

TEST(Vote, ExactTieGoesToSevereClass) {
  const EnsembleModel e({constant_member(ClassLabel::kNoDR), constant_member(ClassLabel::kSevereDR)},
                        {flat(0.7), flat(0.7)}, WeightBasis::kOverallAccuracy);
  EXPECT_EQ(vote(e, kProbe).label, ClassLabel::kSevereDR);
  const EnsembleModel e2({constant_member(ClassLabel::kMildDR), constant_member(ClassLabel::kNoDR)},
                         {flat(0.4), flat(0.4)}, WeightBasis::kOverallAccuracy);
  EXPECT_EQ(vote(e2, kProbe).label, ClassLabel::kMildDR);
}

TEST(Vote, UnanimityIgnoresWeights) {
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const ClassLabel c = label_at(rng.below(3));
    std::vector<ModelPtr> members;
    std::vector<MemberWeights> weights;
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t m = 0; m < n; ++m) {
      members.push_back(constant_member(c));
      weights.push_back({{rng.uniform(), rng.uniform(), rng.uniform() + 1e-3}});
    }
    weights[0].by_class[index_of(c)] = 0.5;
    EXPECT_EQ(vote(EnsembleModel(members, weights, WeightBasis::kPerClassAccuracy), kProbe).label, c);
  }
}

// Random ensembles of constant voters with random per-class weights.
struct RandomEnsemble {
  std::vector<ModelPtr> members;
  std::vector<MemberWeights> weights;
};

RandomEnsemble random_ensemble(Rng& rng) {
  RandomEnsemble r;
  const std::size_t n = 2 + rng.below(5);
  for (std::size_t m = 0; m < n; ++m) {
    r.members.push_back(constant_member(label_at(rng.below(3))));
    r.weights.push_back({{0.05 + rng.uniform(), 0.05 + rng.uniform(), 0.05 + rng.uniform()}});
  }
  return r;
}

TEST(Vote, PositiveRescalingKeepsWinner) {
  Rng rng(52);
  for (int trial = 0; trial < 300; ++trial) {
    RandomEnsemble r = random_ensemble(rng);
    const ClassLabel before = vote(EnsembleModel(r.members, r.weights, WeightBasis::kPerClassAccuracy), kProbe).label;
    // Powers of two keep the products exact, so ties stay ties.
    const double lambda = std::ldexp(1.0, static_cast<int>(rng.below(20)) - 10);
    for (auto& w : r.weights) {
      for (auto& v : w.by_class) v *= lambda;
    }
    EXPECT_EQ(vote(EnsembleModel(r.members, r.weights, WeightBasis::kPerClassAccuracy), kProbe).label, before);
  }
}

TEST(Vote, RaisingAWeightNeverMovesAwayFromThatMember) {
  Rng rng(53);
  for (int trial = 0; trial < 300; ++trial) {
    RandomEnsemble r = random_ensemble(rng);
    const ClassLabel before = vote(EnsembleModel(r.members, r.weights, WeightBasis::kPerClassAccuracy), kProbe).label;
    const std::size_t m = rng.below(r.members.size());
    const ClassLabel own = r.members[m]->predict(kProbe);
    for (auto& v : r.weights[m].by_class) v += rng.uniform(0.0, 2.0);
    const ClassLabel after = vote(EnsembleModel(r.members, r.weights, WeightBasis::kPerClassAccuracy), kProbe).label;
    EXPECT_TRUE(after == before || after == own) << "trial " << trial;
  }
}

TEST(FitWeights, DominantMemberWins) {
  FeatureDataset val;
  for (int k = 0; k < 10; ++k) {
    const double x = k < 5 ? -1.0 - k : 1.0 + k;
    val.vectors.push_back({{x}, "v"});
    val.labels.push_back(k < 5 ? ClassLabel::kNoDR : ClassLabel::kMildDR);
  }
  const ModelPtr good = step_member(ClassLabel::kNoDR, ClassLabel::kMildDR);
  const ModelPtr bad = step_member(ClassLabel::kMildDR, ClassLabel::kNoDR);
  for (WeightBasis basis : {WeightBasis::kOverallAccuracy, WeightBasis::kPerClassAccuracy}) {
    const EnsembleModel e = fit_weights({good, bad}, val, basis);
    Rng rng(54);
    for (int probe = 0; probe < 200; ++probe) {
      const std::vector<double> x{rng.normal(0.0, 5.0)};
      EXPECT_EQ(vote(e, x).label, good->predict(x));
    }
  }
}

TEST(FitWeights, OverallBasisFillsEveryColumn) {
  FeatureDataset val;
  for (int k = 0; k < 9; ++k) {
    val.vectors.push_back({{0.0}, "v"});
    val.labels.push_back(label_at(k % 3));
  }
  const EnsembleModel e = fit_weights({constant_member(ClassLabel::kMildDR)}, val, WeightBasis::kOverallAccuracy);
  for (double w : e.weights()[0].by_class) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
  const EnsembleModel pc = fit_weights({constant_member(ClassLabel::kMildDR)}, val, WeightBasis::kPerClassAccuracy);
  EXPECT_EQ(pc.weights()[0].by_class, (std::array<double, 3>{0.0, 1.0, 0.0}));
}

TEST(FitWeights, PerClassColumnIsThatClassAccuracy) {
  // A member scoring 95.34 / 89.01 / 75.95 percent per class votes for
  // Severe-DR with weight 0.7595.
  const std::array<int, 3> correct{9534, 8901, 7595};
  FeatureDataset val;
  for (std::size_t c = 0; c < 3; ++c) {
    for (int k = 0; k < 10000; ++k) {
      // x encodes whether the step member gets this row right.
      const bool hit = k < correct[c];
      val.vectors.push_back({{hit ? static_cast<double>(c) : static_cast<double>((c + 1) % 3)}, "v"});
      val.labels.push_back(label_at(c));
    }
  }
  // A single tree with thresholds 0.5 and 1.5 predicts round(x).
  ForestParams f;
  f.trees = {{TreeNode{0, 0.5, 1, 2, ClassLabel::kNoDR}, TreeNode{-1, 0, -1, -1, ClassLabel::kNoDR},
              TreeNode{0, 1.5, 3, 4, ClassLabel::kNoDR}, TreeNode{-1, 0, -1, -1, ClassLabel::kMildDR},
              TreeNode{-1, 0, -1, -1, ClassLabel::kSevereDR}}};
  const auto member = std::make_shared<TrainedModel>(ModelKind::kRandomForest, Hyperparams{}, 0, 1, f);
  const EnsembleModel e = fit_weights({member}, val, WeightBasis::kPerClassAccuracy);
  EXPECT_NEAR(e.weights()[0].by_class[0], 0.9534, 1e-12);
  EXPECT_NEAR(e.weights()[0].by_class[1], 0.8901, 1e-12);
  EXPECT_NEAR(e.weights()[0].by_class[2], 0.7595, 1e-12);
}

TEST(Ensemble, SingleMemberMatchesIt) {
  const FeatureDataset ds = apply_scaler(gen_features(55, 40, 5, 2.0), fit_scaler(gen_features(55, 40, 5, 2.0)));
  Hyperparams hp;
  hp.n_trees = 10;
  const auto member = std::make_shared<TrainedModel>(train(ModelKind::kRandomForest, ds, hp, 2));
  for (WeightBasis basis : {WeightBasis::kOverallAccuracy, WeightBasis::kPerClassAccuracy}) {
    const EnsembleModel e = fit_weights({member}, ds, basis);
    Rng rng(56);
    for (int probe = 0; probe < 500; ++probe) {
      std::vector<double> x(5);
      for (auto& v : x) v = rng.normal(0.0, 2.0);
      EXPECT_EQ(vote(e, x).label, member->predict(x));
    }
  }
}

TEST(Ensemble, InvalidConstruction) {
  expect_error(ErrorKind::kInvalidArgument, [] { EnsembleModel({}, {}, WeightBasis::kOverallAccuracy); });
  expect_error(ErrorKind::kDimensionMismatch,
               [] { EnsembleModel({constant_member(ClassLabel::kNoDR)}, {}, WeightBasis::kOverallAccuracy); });
  expect_error(ErrorKind::kInvalidArgument,
               [] { EnsembleModel({constant_member(ClassLabel::kNoDR)}, {flat(-0.1)}, WeightBasis::kOverallAccuracy); });
  expect_error(ErrorKind::kInvalidArgument,
               [] { EnsembleModel({constant_member(ClassLabel::kNoDR)}, {flat(0.0)}, WeightBasis::kOverallAccuracy); });
  expect_error(ErrorKind::kInvalidArgument, [] { fit_weights({}, FeatureDataset{}); });
  expect_error(ErrorKind::kEmptyInput, [] { fit_weights({constant_member(ClassLabel::kNoDR)}, FeatureDataset{}); });
}

TEST(Ensemble, WeightBasisNames) {
  EXPECT_EQ(parse_weight_basis(weight_basis_name(WeightBasis::kPerClassAccuracy)), WeightBasis::kPerClassAccuracy);
  EXPECT_EQ(parse_weight_basis(weight_basis_name(WeightBasis::kOverallAccuracy)), WeightBasis::kOverallAccuracy);
  expect_error(ErrorKind::kInvalidArgument, [] { parse_weight_basis("median"); });
}

TEST(Ensemble, SaveLoadRoundTrip) {
  test::TempDir dir;
  const FeatureDataset raw = gen_features(57, 30, 4, 5.0);
  const Scaler scaler = fit_scaler(raw);
  const FeatureDataset ds = apply_scaler(raw, scaler);
  std::vector<ModelPtr> members;
  std::vector<std::filesystem::path> paths;
  for (ModelKind k : {ModelKind::kSvmLinear, ModelKind::kNaiveBayes}) {
    members.push_back(std::make_shared<TrainedModel>(train(k, ds, {}, 3)));
    paths.push_back(dir / (std::string(model_kind_name(k)) + ".model.json"));
    save_model(*members.back(), paths.back());
  }
  const EnsembleModel e = fit_weights(members, ds);
  save_ensemble(e, paths, dir / "ensemble.json", scaler);
  const LoadedEnsemble back = load_ensemble(dir / "ensemble.json");
  ASSERT_TRUE(back.scaler.has_value());
  EXPECT_EQ(*back.scaler, scaler);
  EXPECT_EQ(back.model.basis(), e.basis());
  ASSERT_EQ(back.model.weights().size(), 2u);
  for (std::size_t m = 0; m < 2; ++m) EXPECT_EQ(back.model.weights()[m].by_class, e.weights()[m].by_class);
  Rng rng(58);
  for (int probe = 0; probe < 300; ++probe) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.normal(0.0, 2.0);
    const VoteResult a = vote(e, x), b = vote(back.model, x);
    EXPECT_EQ(a.label, b.label);
    EXPECT_EQ(a.scores, b.scores);
  }
  expect_error(ErrorKind::kDimensionMismatch, [&] { save_ensemble(e, {paths[0]}, dir / "bad.json"); });
}

}  // namespace
}  // namespace drgrade
