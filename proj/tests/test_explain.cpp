#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fairaudit/explain.hpp"
#include "fairaudit/mitigate.hpp"

namespace fa = fairaudit;
namespace fs = std::filesystem;

namespace {

// Shapley values from the permutation definition: the average marginal
// contribution of each feature over all d! orderings, with an interventional
// value function evaluated directly on composite rows.
std::vector<double> permutation_shapley(const fa::Predictor& f, std::span<const double> x, const fa::Matrix& bg) {
  const std::size_t d = x.size();
  auto value = [&](const std::vector<bool>& in) {
    double total = 0.0;
    std::vector<double> z(d);
    for (Eigen::Index r = 0; r < bg.rows(); ++r) {
      for (std::size_t j = 0; j < d; ++j) z[j] = in[j] ? x[j] : bg(r, static_cast<Eigen::Index>(j));
      total += f.predict_proba(z);
    }
    return total / static_cast<double>(bg.rows());
  };
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(d, 0.0);
  double count = 0.0;
  do {
    std::vector<bool> in(d, false);
    double prev = value(in);
    for (std::size_t j : order) {
      in[j] = true;
      const double cur = value(in);
      phi[j] += cur - prev;
      prev = cur;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& p : phi) p /= count;
  return phi;
}

fa::TrainedModel linear_logistic(std::vector<double> w, double b) {
  fa::Vector coef = Eigen::Map<fa::Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return fa::TrainedModel(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), w.size(), fa::LogisticState{coef, b});
}

// Identity-link linear score, clipped nowhere: callers keep it in range.
class LinearScore final : public fa::Predictor {
 public:
  LinearScore(std::vector<double> w, double b) : w_(std::move(w)), b_(b) {}
  double predict_proba(std::span<const double> x) const override {
    double s = b_;
    for (std::size_t i = 0; i < w_.size(); ++i) s += w_[i] * x[i];
    return s;
  }
  using fa::Predictor::predict_proba;
  std::size_t feature_count() const override { return w_.size(); }

 private:
  std::vector<double> w_;
  double b_;
};

fa::ModelSpec forest_spec(int trees, int depth, std::uint64_t seed) {
  return fa::ModelSpec::from_json(
      {{"kind", "forest"}, {"hyperparameters", {{"n_trees", trees}, {"max_depth", depth}, {"seed", seed}}}});
}

fa::Background first_rows(const fa::Dataset& d, std::size_t n) {
  return fa::Background(d.x().topRows(static_cast<Eigen::Index>(n)));
}

void expect_local_accuracy(const fa::ShapExplanation& e, double tol) {
  EXPECT_NEAR(e.phi.sum() + e.base_value, e.fx, tol);
}

fa::ShapMatrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  fa::ShapMatrix m;
  const auto d = rows.front().size();
  m.phi.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) m.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    m.row_ids.push_back(std::to_string(i + 1));
    m.base_values.push_back(0.0);
    m.fx.push_back(0.0);
  }
  for (std::size_t j = 0; j < d; ++j) m.feature_names.push_back("f" + std::to_string(j));
  return m;
}

fa::Dataset groups_only(const std::vector<int>& a, std::size_t d) {
  const auto n = a.size();
  std::vector<std::string> names, ids;
  for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i + 1));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
  return fa::Dataset(fa::Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)), y, a, names, ids);
}

}  // namespace

TEST(BackgroundTest, SampleAndFingerprint) {
  const auto d = fa::synth_biased(200, 4, 1.0, 1);
  const auto a = fa::Background::sample(d, 50, 9);
  const auto b = fa::Background::sample(d, 50, 9);
  EXPECT_EQ(a.size(), 50u);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.fingerprint().size(), 16u);
  EXPECT_NE(a.fingerprint(), fa::Background::sample(d, 50, 10).fingerprint());
  const auto all = fa::Background::sample(d, 500, 9);
  EXPECT_TRUE(all.rows() == d.x());
  // Binary features collapse to few distinct rows; multiplicities add up.
  const auto& m = all.multiplicity();
  EXPECT_LE(all.unique_rows().rows(), 16);
  EXPECT_DOUBLE_EQ(std::accumulate(m.begin(), m.end(), 0.0), 200.0);
}

TEST(ValueFunction, Endpoints) {
  const auto d = fa::synth_biased(100, 4, 1.0, 2);
  const auto bg = first_rows(d, 20);
  const auto model = linear_logistic({0.5, -1.0, 2.0, 0.3}, 0.1);
  const auto x = d.row(50);
  EXPECT_DOUBLE_EQ(fa::value_function(model, x, std::vector<bool>(4, true), bg), model.predict_proba(x));
  const auto probs = model.predict_proba(bg.rows());
  const double mean = std::accumulate(probs.begin(), probs.end(), 0.0) / 20.0;
  EXPECT_NEAR(fa::value_function(model, x, std::vector<bool>(4, false), bg), mean, 1e-15);
  EXPECT_NEAR(fa::exact_shap(model, x, bg).base_value, mean, 1e-15);

  const auto constant = linear_logistic({0, 0, 0, 0}, 0.7);
  for (int mask = 0; mask < 16; ++mask) {
    std::vector<bool> s(4);
    for (int j = 0; j < 4; ++j) s[static_cast<std::size_t>(j)] = (mask >> j) & 1;
    EXPECT_DOUBLE_EQ(fa::value_function(constant, x, s, bg), constant.predict_proba(x));
  }
}

TEST(ExactShap, MatchesPermutationDefinition) {
  const auto d = fa::synth_biased(300, 6, 1.0, 3);
  const auto model = fa::train(fa::ModelSpec::defaults(fa::ModelKind::kNeural).with_seed(1), d);
  const auto bg = first_rows(d, 10);
  for (std::size_t i : {100u, 200u}) {
    const auto e = fa::exact_shap(model, d.row(i), bg);
    const auto oracle = permutation_shapley(model, d.row(i), bg.rows());
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(e.phi(static_cast<Eigen::Index>(j)), oracle[j], 1e-12);
    expect_local_accuracy(e, 1e-12);
  }
}

TEST(ExactShap, LinearClosedForm) {
  fa::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> w(5), x(5), b(5);
    for (std::size_t j = 0; j < 5; ++j) {
      w[j] = rng.uniform() * 2 - 1;
      x[j] = rng.uniform() * 4 - 2;
      b[j] = rng.uniform() * 4 - 2;
    }
    LinearScore model(w, 0.25);
    fa::Matrix bg(1, 5);
    for (std::size_t j = 0; j < 5; ++j) bg(0, static_cast<Eigen::Index>(j)) = b[j];
    const auto e = fa::exact_shap(model, x, fa::Background(bg));
    for (std::size_t j = 0; j < 5; ++j) ASSERT_NEAR(e.phi(static_cast<Eigen::Index>(j)), w[j] * (x[j] - b[j]), 1e-10);
  }
}

TEST(ExactShap, DummyAndSymmetry) {
  const auto d = fa::synth_biased(100, 4, 1.0, 4);
  const auto bg = first_rows(d, 20);
  // Feature 3 is never read; features 1 and 2 are interchangeable.
  const auto model = linear_logistic({0.8, 1.3, 1.3, 0.0}, -0.2);
  const std::vector<double> x = {1.0, 1.0, 1.0, 1.0};
  fa::Matrix rows = bg.rows();
  rows.col(2) = rows.col(1);
  const auto e = fa::exact_shap(model, x, fa::Background(rows));
  EXPECT_EQ(e.phi(3), 0.0);
  EXPECT_NEAR(e.phi(1), e.phi(2), 1e-15);
}

TEST(ExactShap, Linearity) {
  const auto d = fa::synth_biased(200, 5, 1.0, 5);
  const auto bg = first_rows(d, 15);
  const auto f1 = fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), d);
  const auto f2 = fa::train(forest_spec(5, 3, 1), d);
  const fa::MixtureModel both({f1, f2}, {0.5, 0.5});
  const auto x = d.row(7);
  const auto e = fa::exact_shap(both, x, bg);
  const auto e1 = fa::exact_shap(f1, x, bg);
  const auto e2 = fa::exact_shap(f2, x, bg);
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(e.phi(j), 0.5 * e1.phi(j) + 0.5 * e2.phi(j), 1e-9);
}

TEST(ExactShap, EnumerationLimit) {
  const std::vector<double> w(16, 0.1);
  LinearScore model(w, 0.0);
  const std::vector<double> x(16, 1.0);
  try {
    fa::exact_shap(model, x, fa::Background(fa::Matrix::Zero(1, 16)));
    FAIL();
  } catch (const fa::Error& e) {
    EXPECT_EQ(e.code(), fa::ErrorCode::kEnumerationLimit);
  }
}

TEST(KernelShap, FullEnumerationMatchesExact) {
  const auto d = fa::synth_biased(300, 7, 1.0, 6);
  const auto model = fa::train(forest_spec(10, 4, 2), d);
  const auto bg = first_rows(d, 32);
  for (std::size_t i = 40; i < 50; ++i) {
    const auto k = fa::kernel_shap(model, d.row(i), bg, 1 << 7, 0);
    const auto e = fa::exact_shap(model, d.row(i), bg);
    for (Eigen::Index j = 0; j < 7; ++j) EXPECT_NEAR(k.phi(j), e.phi(j), 1e-6);
    expect_local_accuracy(k, 1e-6);
  }
}

TEST(KernelShap, SingleFeature) {
  const auto model = linear_logistic({1.7}, -0.3);
  fa::Matrix bg(3, 1);
  bg << 0.0, 1.0, -2.0;
  const std::vector<double> x = {0.9};
  const auto k = fa::kernel_shap(model, x, fa::Background(bg), 10, 0);
  EXPECT_EQ(k.phi(0), k.fx - k.base_value);
}

TEST(KernelShap, SampledRegimeIsDeterministicAndClose) {
  const auto d = fa::synth_biased(400, 12, 1.0, 7);
  const auto model = fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), d);
  const auto bg = first_rows(d, 20);
  const auto a = fa::kernel_shap(model, d.row(3), bg, 512, 42);
  const auto b = fa::kernel_shap(model, d.row(3), bg, 512, 42);
  EXPECT_TRUE(a.phi == b.phi);
  expect_local_accuracy(a, 1e-9);
  const auto e = fa::exact_shap(model, d.row(3), bg);
  EXPECT_LT((a.phi - e.phi).lpNorm<Eigen::Infinity>(), 0.02);
}

TEST(KernelShap, DegenerateSystem) {
  LinearScore model({}, 0.5);
  EXPECT_THROW(fa::kernel_shap(model, std::vector<double>{}, fa::Background(fa::Matrix::Zero(1, 0)), 10, 0),
               fa::Error);
}

TEST(TreeShap, StumpExample) {
  fa::ForestState s{{fa::Tree::stump(0, 0.5, 0.1, 0.9)}};
  fa::TrainedModel m(fa::ModelSpec::defaults(fa::ModelKind::kForest), 3, s);
  fa::Matrix bg(1, 3);
  bg << 0.0, 1.0, 1.0;
  const std::vector<double> x = {1.0, 0.0, 0.0};
  const auto t = fa::tree_shap(m, x, fa::Background(bg));
  EXPECT_NEAR(t.phi(0), 0.8, 1e-15);
  EXPECT_EQ(t.phi(1), 0.0);
  EXPECT_EQ(t.phi(2), 0.0);
  const auto oracle = permutation_shapley(m, x, bg);
  EXPECT_NEAR(oracle[0], 0.8, 1e-15);
}

TEST(TreeShap, IdenticalTreesAverageToSingle) {
  const auto d = fa::synth_biased(300, 5, 1.0, 8);
  const auto one = fa::train(forest_spec(1, 4, 3), d);
  const auto& tree = std::get<fa::ForestState>(one.state()).trees.front();
  fa::TrainedModel two(one.spec(), 5, fa::ForestState{{tree, tree}});
  const auto bg = first_rows(d, 25);
  const auto a = fa::tree_shap(one, d.row(9), bg);
  const auto b = fa::tree_shap(two, d.row(9), bg);
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(a.phi(j), b.phi(j), 1e-15);
}

TEST(TreeShap, ForestAgreesWithExactAtUtiScale) {
  const auto d = fa::synth_biased(500, 7, 1.0, 9);
  const auto model = fa::train(forest_spec(20, 5, 4), d);
  const auto bg = fa::Background::sample(d, 32, 1);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto t = fa::tree_shap(model, d.row(i), bg);
    const auto e = fa::exact_shap(model, d.row(i), bg);
    for (Eigen::Index j = 0; j < 7; ++j) ASSERT_NEAR(t.phi(j), e.phi(j), 1e-9);
    expect_local_accuracy(t, 1e-9);
  }
}

TEST(TreeShap, BoostedMarginRescaleKeepsLocalAccuracy) {
  const auto d = fa::synth_biased(500, 6, 1.0, 10);
  const auto model = fa::train(fa::ModelSpec::from_json({{"kind", "boosted"}, {"hyperparameters", {{"n_rounds", 30}}}}), d);
  const auto bg = fa::Background::sample(d, 30, 2);
  for (std::size_t i = 0; i < 20; ++i) {
    double factor = 0.0;
    const auto t = fa::tree_shap(model, d.row(i), bg, &factor);
    expect_local_accuracy(t, 1e-9);
    if (!std::isnan(factor)) {
      EXPECT_GT(factor, 0.0);
    }
    // Against exact probability-space values the ordering of the dominant
    // feature is preserved.
    const auto e = fa::exact_shap(model, d.row(i), bg);
    Eigen::Index te, ee;
    t.phi.cwiseAbs().maxCoeff(&te);
    e.phi.cwiseAbs().maxCoeff(&ee);
    EXPECT_EQ(te, ee);
  }
}

TEST(TreeShap, RejectsNonTreeModels) {
  const auto d = fa::synth_biased(100, 3, 1.0, 11);
  const auto model = fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), d);
  try {
    fa::tree_shap(model, d.row(0), first_rows(d, 5));
    FAIL();
  } catch (const fa::Error& e) {
    EXPECT_EQ(e.code(), fa::ErrorCode::kKind);
  }
  try {
    fa::explain_testset(model, d, first_rows(d, 5), fa::Estimator::kTree);
    FAIL();
  } catch (const fa::Error& e) {
    EXPECT_EQ(e.code(), fa::ErrorCode::kConfig);
  }
}

TEST(TreeShap, TreeMixture) {
  const auto d = fa::synth_biased(300, 5, 1.0, 12);
  const auto f1 = fa::train(forest_spec(3, 3, 1), d);
  const auto f2 = fa::train(forest_spec(3, 3, 2), d);
  const fa::MixtureModel mix({f1, f2}, {0.3, 0.7});
  const auto bg = first_rows(d, 20);
  const auto t = fa::tree_shap(mix, d.row(5), bg);
  const auto e = fa::exact_shap(mix, d.row(5), bg);
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(t.phi(j), e.phi(j), 1e-9);
}

TEST(ExplainTestset, EmptyTestSet) {
  const auto d = fa::synth_biased(100, 3, 1.0, 13);
  const auto model = fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), d);
  const auto empty = d.subset(std::vector<std::size_t>{});
  const auto m = fa::explain_testset(model, empty, first_rows(d, 5), fa::Estimator::kExact);
  EXPECT_EQ(m.rows(), 0u);
  EXPECT_EQ(m.phi.rows(), 0);
}

TEST(ExplainTestset, SingleMemberMixtureMatchesMember) {
  const auto d = fa::synth_biased(200, 5, 1.0, 14);
  const auto model = fa::train(fa::ModelSpec::defaults(fa::ModelKind::kNeural).with_seed(2), d);
  const fa::MixtureModel mix({model}, {1.0});
  const auto test = d.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  fa::ExplainParams p;
  p.n_coalitions = 24;
  p.seed = 77;
  const auto a = fa::explain_testset(model, test, first_rows(d, 10), fa::Estimator::kKernel, p);
  const auto b = fa::explain_testset(mix, test, first_rows(d, 10), fa::Estimator::kKernel, p);
  EXPECT_TRUE(a.phi == b.phi);
  EXPECT_EQ(a.base_values, b.base_values);
}

TEST(ExplainTestset, ExactLocalAccuracyOnUtiFixture) {
  const auto s = fa::split(fa::synth_biased(250, 7, 1.0, 15), 0.8, 15);
  const auto model = fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), s.train);
  const auto bg = fa::Background::sample(s.train, 32, 3);
  const auto m = fa::explain_testset(model, s.test, bg, fa::Estimator::kExact);
  ASSERT_EQ(m.rows(), 50u);
  for (std::size_t i = 0; i < m.rows(); ++i) expect_local_accuracy(m.row(i), 1e-9);
  EXPECT_EQ(m.row_ids, s.test.row_ids());
  EXPECT_EQ(m.background_fingerprint, bg.fingerprint());
}

TEST(ExplainTestset, ThreadCountDoesNotChangeResults) {
  const auto s = fa::split(fa::synth_biased(300, 6, 1.0, 16), 0.8, 16);
  const auto model = fa::train(forest_spec(8, 4, 5), s.train);
  const auto bg = fa::Background::sample(s.train, 20, 4);
  fa::ExplainParams p;
  p.n_coalitions = 40;
  p.seed = 3;
  for (auto est : {fa::Estimator::kKernel, fa::Estimator::kTree}) {
    p.threads = 1;
    const auto a = fa::explain_testset(model, s.test, bg, est, p);
    p.threads = 3;
    const auto b = fa::explain_testset(model, s.test, bg, est, p);
    EXPECT_TRUE(a.phi == b.phi);
  }
}

TEST(ShapMatrixIo, RoundTripWithSidecar) {
  const auto s = fa::split(fa::synth_biased(200, 4, 1.0, 17), 0.8, 17);
  const auto model = fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), s.train);
  const auto bg = fa::Background::sample(s.train, 10, 5);
  fa::ExplainParams p;
  p.seed = 12;
  const auto m = fa::explain_testset(model, s.test, bg, fa::Estimator::kExact, p);
  const fs::path csv = fs::temp_directory_path() / "fairaudit-shap-roundtrip.csv";
  m.write(csv);
  EXPECT_EQ(fa::ShapMatrix::sidecar_path(csv), fs::temp_directory_path() / "fairaudit-shap-roundtrip.json");
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "row_id,base_value,fx,phi_x0,phi_x1,phi_x2,phi_x3");
  const auto side = nlohmann::json::parse(std::ifstream(fa::ShapMatrix::sidecar_path(csv)));
  EXPECT_EQ(side.at("estimator"), "exact");
  EXPECT_EQ(side.at("seed"), 12);
  EXPECT_EQ(side.at("background_fingerprint"), bg.fingerprint());

  const auto back = fa::ShapMatrix::read(csv);
  EXPECT_EQ(back.estimator, m.estimator);
  EXPECT_EQ(back.row_ids, m.row_ids);
  EXPECT_EQ(back.feature_names, m.feature_names);
  EXPECT_TRUE(back.phi == m.phi);
  EXPECT_EQ(back.fx, m.fx);
  fs::remove(csv);
  fs::remove(fa::ShapMatrix::sidecar_path(csv));
}

TEST(GlobalImportanceTest, AbsoluteMean) {
  const auto m = matrix_from_rows({{0.2, -0.1}, {0.2, -0.1}, {0.2, -0.1}});
  const auto g = fa::global_importance(m, groups_only({0, 1, 0}, 2), fa::GroupFilter::kOverall);
  EXPECT_NEAR(g.importance[0], 0.2, 1e-15);
  EXPECT_NEAR(g.importance[1], 0.1, 1e-15);
  EXPECT_EQ(g.rows, 3u);
}

TEST(GlobalImportanceTest, OneRowPerGroup) {
  const auto m = matrix_from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const auto test = groups_only({1, 0}, 2);
  EXPECT_EQ(fa::global_importance(m, test, fa::GroupFilter::kBlack).importance, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(fa::global_importance(m, test, fa::GroupFilter::kNonBlack).importance, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(fa::global_importance(m, test, fa::GroupFilter::kOverall).importance, (std::vector<double>{0.5, 0.5}));
}

TEST(GlobalImportanceTest, PartitionIdentity) {
  fa::Rng rng(3);
  std::vector<std::vector<double>> rows(37, std::vector<double>(4));
  std::vector<int> a(37);
  for (std::size_t i = 0; i < 37; ++i) {
    for (auto& v : rows[i]) v = rng.uniform() - 0.5;
    a[i] = rng.bernoulli(0.4) ? 1 : 0;
  }
  const auto m = matrix_from_rows(rows);
  const auto test = groups_only(a, 4);
  const auto all = fa::global_importance(m, test, fa::GroupFilter::kOverall);
  const auto black = fa::global_importance(m, test, fa::GroupFilter::kBlack);
  const auto other = fa::global_importance(m, test, fa::GroupFilter::kNonBlack);
  EXPECT_EQ(black.rows + other.rows, 37u);
  for (std::size_t j = 0; j < 4; ++j) {
    const double mix = (black.importance[j] * static_cast<double>(black.rows) +
                        other.importance[j] * static_cast<double>(other.rows)) /
                       37.0;
    EXPECT_NEAR(all.importance[j], mix, 1e-15);
  }
}

TEST(GlobalImportanceTest, EmptyGroupAndShapeErrors) {
  const auto m = matrix_from_rows({{1.0, 0.0}, {0.0, 1.0}});
  try {
    fa::global_importance(m, groups_only({0, 0}, 2), fa::GroupFilter::kBlack);
    FAIL();
  } catch (const fa::Error& e) {
    EXPECT_EQ(e.code(), fa::ErrorCode::kEmptyGroup);
  }
  try {
    fa::global_importance(m, groups_only({0, 1, 1}, 2), fa::GroupFilter::kOverall);
    FAIL();
  } catch (const fa::Error& e) {
    EXPECT_EQ(e.code(), fa::ErrorCode::kShape);
  }
}

TEST(EstimatorNames, ParseAndDefaults) {
  for (auto e : {fa::Estimator::kExact, fa::Estimator::kKernel, fa::Estimator::kTree}) {
    EXPECT_EQ(fa::parse_estimator(fa::to_string(e)), e);
  }
  EXPECT_THROW(fa::parse_estimator("deep"), fa::Error);
  const auto d = fa::synth_biased(100, 4, 1.0, 1);
  EXPECT_EQ(fa::default_estimator(fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), d)),
            fa::Estimator::kExact);
  EXPECT_EQ(fa::default_estimator(fa::train(forest_spec(2, 2, 1), d)), fa::Estimator::kTree);
  const auto lr = fa::train(fa::ModelSpec::defaults(fa::ModelKind::kLogistic), d);
  EXPECT_EQ(fa::default_estimator(fa::MixtureModel({lr}, {1.0})), fa::Estimator::kKernel);
}
