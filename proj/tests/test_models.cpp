#include <cmath>
#include <numeric>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fairaudit/detail/learners.hpp"
#include "fairaudit/models.hpp"

namespace fa = fairaudit;

namespace {

fa::Dataset separable() {
  fa::Matrix x(8, 2);
  x << 0.0, 0.1, 0.2, 0.3, 0.1, 0.4, 0.3, 0.0, 1.0, 1.1, 1.2, 0.9, 0.9, 1.3, 1.4, 1.0;
  return fa::Dataset(x, {0, 0, 0, 0, 1, 1, 1, 1}, {0, 1, 0, 1, 0, 1, 0, 1}, {"u", "v"},
                     {"1", "2", "3", "4", "5", "6", "7", "8"});
}

fa::ModelSpec small_spec(fa::ModelKind kind) {
  switch (kind) {
    case fa::ModelKind::kForest: return fa::ModelSpec::from_json({{"kind", "forest"}, {"hyperparameters", {{"n_trees", 10}, {"max_depth", 4}, {"seed", 3}}}});
    case fa::ModelKind::kBoosted: return fa::ModelSpec::from_json({{"kind", "boosted"}, {"hyperparameters", {{"n_rounds", 20}}}});
    case fa::ModelKind::kNeural: return fa::ModelSpec::from_json({{"kind", "neural"}, {"hyperparameters", {{"epochs", 60}, {"hidden_width", 6}, {"seed", 3}}}});
    default: return fa::ModelSpec::defaults(kind);
  }
}

constexpr fa::ModelKind kKinds[] = {fa::ModelKind::kLogistic, fa::ModelKind::kForest, fa::ModelKind::kBoosted,
                                    fa::ModelKind::kNeural};

// Weighted mean log-loss gradient with an l2 penalty on the coefficients,
// written out directly from the objective.
fa::Vector logistic_gradient(const fa::LogisticState& s, const fa::Dataset& d, const std::vector<double>& w,
                             double l2) {
  const auto k = static_cast<Eigen::Index>(d.features());
  fa::Vector g = fa::Vector::Zero(k + 1);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    double z = s.intercept;
    for (Eigen::Index j = 0; j < k; ++j) z += s.coef(j) * d.x()(static_cast<Eigen::Index>(i), j);
    const double r = (1.0 / (1.0 + std::exp(-z)) - d.y()[i]) * w[i] / total;
    for (Eigen::Index j = 0; j < k; ++j) g(j) += r * d.x()(static_cast<Eigen::Index>(i), j);
    g(k) += r;
  }
  g.head(k) += l2 * s.coef;
  return g;
}

}  // namespace

TEST(ModelKindTest, ParseAndPrint) {
  for (auto k : kKinds) EXPECT_EQ(fa::parse_model_kind(fa::to_string(k)), k);
  EXPECT_THROW(fa::parse_model_kind("svm"), fa::Error);
}

TEST(ModelSpecTest, JsonRoundTrip) {
  for (auto k : kKinds) {
    const auto spec = small_spec(k).with_seed(99);
    const auto back = fa::ModelSpec::from_json(spec.to_json());
    EXPECT_EQ(back.to_json(), spec.to_json());
    EXPECT_EQ(back.kind(), k);
  }
  EXPECT_THROW(fa::ModelSpec::from_json({{"kind", "forest"}, {"hyperparameters", {{"n_trees", 0}}}}), fa::Error);
  EXPECT_THROW(fa::ModelSpec::from_json({{"kind", "forest"}, {"hyperparameters", {{"bogus", 1}}}}), fa::Error);
}

TEST(Logistic, SeparableTrainingAccuracy) {
  const auto d = separable();
  const auto m = fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), d);
  EXPECT_EQ(m.predict_labels(d.x()), d.y());
}

TEST(Logistic, StationaryPointOfObjective) {
  const auto d = fa::synth_biased(400, 5, 1.0, 2);
  std::vector<double> w(d.rows());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + static_cast<double>(i % 3);
  fa::LogisticParams p;
  const auto fit = fa::detail::fit_logistic(d.x(), d.y(), w, p);
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(logistic_gradient(fit.state, d, w, p.l2).lpNorm<Eigen::Infinity>(), 1e-8);
  for (std::size_t i = 1; i < fit.losses.size(); ++i) EXPECT_LE(fit.losses[i], fit.losses[i - 1] + 1e-15);
}

TEST(Logistic, DuplicationOracle) {
  const auto d = fa::synth_biased(200, 4, 1.0, 5);
  std::vector<double> w(d.rows(), 1.0);
  std::vector<std::size_t> rows(d.rows());
  std::iota(rows.begin(), rows.end(), 0);
  for (std::size_t i : {3u, 17u, 150u}) {
    w[i] = 2.0;
    rows.push_back(i);
  }
  const auto spec = fa::ModelSpec::defaults(fa::ModelKind::kLogistic);
  const auto weighted = fa::train(spec, d, fa::SampleWeights(w));
  const auto duplicated = fa::train(spec, d.subset(rows));
  const auto& a = std::get<fa::LogisticState>(weighted.state());
  const auto& b = std::get<fa::LogisticState>(duplicated.state());
  EXPECT_NEAR(a.intercept, b.intercept, 1e-8);
  for (Eigen::Index j = 0; j < a.coef.size(); ++j) EXPECT_NEAR(a.coef(j), b.coef(j), 1e-8);
}

TEST(AllKinds, ConstantWeightScaleInvariance) {
  const auto d = fa::synth_biased(200, 4, 1.0, 6);
  for (auto k : kKinds) {
    const auto spec = small_spec(k);
    const auto ones = fa::train(spec, d, fa::SampleWeights::uniform(d.rows()));
    const auto scaled = fa::train(spec, d, fa::SampleWeights(std::vector<double>(d.rows(), 3.7)));
    const auto p1 = ones.predict_proba(d.x());
    const auto p2 = scaled.predict_proba(d.x());
    for (std::size_t i = 0; i < p1.size(); ++i) ASSERT_NEAR(p1[i], p2[i], 1e-10) << fa::to_string(k);
  }
}

TEST(AllKinds, ProbabilitiesInRangeAndJsonRoundTrip) {
  const auto d = fa::synth_biased(200, 4, 1.0, 8);
  for (auto k : kKinds) {
    const auto m = fa::train(small_spec(k), d);
    const auto back = fa::TrainedModel::from_json(m.to_json());
    const auto p = m.predict_proba(d.x());
    const auto q = back.predict_proba(d.x());
    for (std::size_t i = 0; i < p.size(); ++i) {
      ASSERT_GE(p[i], 0.0);
      ASSERT_LE(p[i], 1.0);
      ASSERT_EQ(p[i], q[i]) << fa::to_string(k);
    }
    EXPECT_EQ(back.feature_names(), d.feature_names());
  }
}

TEST(AllKinds, SingleClassIsDegenerateFit) {
  const auto d = fa::synth_biased(100, 3, 1.0, 1).with_labels(std::vector<int>(100, 1));
  for (auto k : kKinds) {
    try {
      fa::train(small_spec(k), d);
      FAIL() << fa::to_string(k);
    } catch (const fa::Error& e) {
      EXPECT_EQ(e.code(), fa::ErrorCode::kDegenerateFit);
    }
  }
  // All weight on the positive rows is equally degenerate.
  const auto mixed = fa::synth_biased(100, 3, 1.0, 1);
  std::vector<double> w(100);
  for (std::size_t i = 0; i < 100; ++i) w[i] = mixed.y()[i];
  EXPECT_THROW(fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), mixed, fa::SampleWeights(w)), fa::Error);
}

TEST(Predict, ZeroLogisticIsHalf) {
  fa::LogisticState s{fa::Vector::Zero(3), 0.0};
  fa::TrainedModel m(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), 3, s);
  const std::vector<double> x = {4.0, -2.0, 7.5};
  EXPECT_EQ(m.predict_proba(x), 0.5);
  EXPECT_EQ(m.predict_label(x), 1);
}

TEST(Predict, StumpTraversal) {
  fa::ForestState s{{fa::Tree::stump(0, 0.5, 0.1, 0.9)}};
  fa::TrainedModel m(fa::ModelSpec::defaults(fa::ModelKind::kForest), 2, s);
  EXPECT_DOUBLE_EQ(m.predict_proba(std::vector<double>{1.0, 0.0}), 0.9);
  EXPECT_DOUBLE_EQ(m.predict_proba(std::vector<double>{0.0, 1.0}), 0.1);
}

TEST(Predict, BoostedZeroRoundsIsBaseRate) {
  const auto d = fa::synth_biased(300, 3, 1.0, 9);
  const auto m = fa::train(fa::ModelSpec::from_json({{"kind", "boosted"}, {"hyperparameters", {{"n_rounds", 0}}}}), d);
  const double rate = std::accumulate(d.y().begin(), d.y().end(), 0.0) / static_cast<double>(d.rows());
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(m.predict_proba(d.row(i)), rate, 1e-12);
}

TEST(Predict, LabelBoundary) {
  auto constant = [](double logit) {
    fa::LogisticState s{fa::Vector::Zero(1), logit};
    return fa::TrainedModel(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), 1, s);
  };
  const std::vector<double> x = {0.0};
  EXPECT_EQ(constant(0.0).predict_label(x), 1);
  EXPECT_EQ(constant(std::log(0.4999 / 0.5001)).predict_label(x), 0);
  EXPECT_EQ(constant(std::log(3.0)).predict_label(x), 1);
}

TEST(Predict, DimensionMismatchIsShapeError) {
  fa::LogisticState s{fa::Vector::Zero(3), 0.0};
  fa::TrainedModel m(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), 3, s);
  try {
    m.predict_proba(std::vector<double>{1.0, 2.0});
    FAIL();
  } catch (const fa::Error& e) {
    EXPECT_EQ(e.code(), fa::ErrorCode::kShape);
  }
}

TEST(Forest, SameSeedSameTrees) {
  const auto d = fa::synth_biased(300, 5, 1.0, 10);
  const auto spec = small_spec(fa::ModelKind::kForest);
  const auto a = fa::train(spec, d);
  const auto b = fa::train(spec, d);
  EXPECT_EQ(a.to_json(), b.to_json());
  const auto c = fa::train(spec.with_seed(4), d);
  EXPECT_NE(a.to_json(), c.to_json());
}

TEST(Tree, JsonRoundTripAndDepth) {
  const auto t = fa::Tree::stump(1, 0.25, -1.0, 2.0);
  EXPECT_EQ(t.depth(), 1);
  const auto back = fa::Tree::from_json(t.to_json());
  EXPECT_EQ(back.predict(std::vector<double>{0.0, 0.3}), 2.0);
  EXPECT_EQ(back.predict(std::vector<double>{0.0, 0.25}), -1.0);
}

TEST(Neural, GradientMatchesFiniteDifferences) {
  const auto d = fa::synth_biased(60, 4, 1.0, 12);
  fa::NeuralParams p;
  p.hidden_width = 5;
  p.epochs = 5;
  std::vector<double> w(d.rows());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 + 0.25 * static_cast<double>(i % 4);
  auto state = fa::detail::fit_neural(d.x(), d.y(), w, p);

  fa::Matrix z = d.x();
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = (z(r, c) - state.input_mean(c)) / state.input_scale(c);
  }
  const double l2 = 0.01;
  const auto analytic = fa::detail::neural_loss_gradient(state, z, d.y(), w, l2);
  const fa::Vector theta = fa::detail::flatten(state);
  ASSERT_EQ(analytic.gradient.size(), theta.size());
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    fa::Vector plus = theta, minus = theta;
    plus(i) += h;
    minus(i) -= h;
    auto sp = state, sm = state;
    fa::detail::unflatten(plus, sp);
    fa::detail::unflatten(minus, sm);
    const double numeric = (fa::detail::neural_loss_gradient(sp, z, d.y(), w, l2).loss -
                            fa::detail::neural_loss_gradient(sm, z, d.y(), w, l2).loss) /
                           (2 * h);
    EXPECT_NEAR(analytic.gradient(i), numeric, 1e-6) << "parameter " << i;
  }
}

TEST(Neural, LearnsSignal) {
  const auto d = fa::synth_biased(600, 4, 1.0, 13);
  const auto m = fa::train(small_spec(fa::ModelKind::kNeural), d);
  const auto pred = m.predict_labels(d.x());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == d.y()[i];
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(pred.size()), 0.7);
}

TEST(SampleWeightsTest, RejectsInvalid) {
  EXPECT_THROW(fa::SampleWeights({1.0, -1.0}), fa::Error);
  EXPECT_THROW(fa::SampleWeights({0.0, 0.0}), fa::Error);
  EXPECT_THROW(fa::SampleWeights({1.0, std::nan("")}), fa::Error);
  const auto d = fa::synth_biased(50, 3, 1.0, 1);
  EXPECT_THROW(fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), d, fa::SampleWeights({1.0, 2.0})),
               fa::Error);
}
