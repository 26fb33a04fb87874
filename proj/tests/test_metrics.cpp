#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fairaudit/common.hpp"
#include "fairaudit/metrics.hpp"

namespace fa = fairaudit;

namespace {

// Builds prediction/label/group vectors from per-cell positive counts.
struct Cells {
  std::vector<int> pred, y, a;
  void add(int group, int label, int positives, int total) {
    for (int i = 0; i < total; ++i) {
      pred.push_back(i < positives ? 1 : 0);
      y.push_back(label);
      a.push_back(group);
    }
  }
};

// Probability that a random positive outscores a random negative, ties
// counted as one half, by direct pair enumeration.
double pairwise_auroc(const std::vector<double>& p, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (y[j] != 0) continue;
      wins += p[i] > p[j] ? 1.0 : p[i] == p[j] ? 0.5 : 0.0;
      ++pairs;
    }
  }
  return wins / pairs;
}

struct RandomCase {
  std::vector<double> p;
  std::vector<int> y, a;
};

RandomCase random_case(std::uint64_t seed, std::size_t n) {
  fa::Rng rng(seed);
  RandomCase c;
  for (std::size_t i = 0; i < n; ++i) {
    // Coarse probabilities so that ties occur.
    c.p.push_back(std::round(rng.uniform() * 20) / 20);
    c.y.push_back(rng.bernoulli(0.3 + 0.4 * c.p.back()) ? 1 : 0);
    c.a.push_back(rng.bernoulli(0.5) ? 1 : 0);
  }
  return c;
}

}  // namespace

TEST(Predictive, PerfectSeparation) {
  const auto m = fa::predictive_metrics(std::vector<double>{0.9, 0.9, 0.1, 0.1}, std::vector<int>{1, 1, 0, 0});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(m.auroc.value(), 1.0);
}

TEST(Predictive, AllTiesGiveHalfAuroc) {
  const auto m = fa::predictive_metrics(std::vector<double>(6, 0.5), std::vector<int>{1, 0, 1, 0, 1, 0});
  EXPECT_EQ(m.auroc.value(), 0.5);
}

TEST(Predictive, HandComputedConfusion) {
  const auto m = fa::predictive_metrics(std::vector<double>{0.9, 0.4, 0.6, 0.1}, std::vector<int>{1, 0, 1, 0});
  EXPECT_EQ(m.confusion.tp, 2u);
  EXPECT_EQ(m.confusion.fp, 0u);
  EXPECT_EQ(m.confusion.fn, 0u);
  EXPECT_EQ(m.confusion.tn, 2u);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.auroc.value(), 1.0);
}

TEST(Predictive, SingleClassLeavesAurocUndefined) {
  const std::vector<double> p = {0.2, 0.7, 0.9};
  const std::vector<int> y = {1, 1, 1};
  const auto m = fa::predictive_metrics(p, y);
  EXPECT_FALSE(m.auroc.has_value());
  EXPECT_NEAR(m.accuracy, 2.0 / 3.0, 1e-15);
  try {
    fa::auroc(p, y);
    FAIL();
  } catch (const fa::Error& e) {
    EXPECT_EQ(e.code(), fa::ErrorCode::kUndefinedRate);
  }
  EXPECT_TRUE(m.to_json().at("auroc").is_null());
}

TEST(Predictive, NoPredictedPositivesWarns) {
  const auto m = fa::predictive_metrics(std::vector<double>{0.1, 0.2, 0.3}, std::vector<int>{1, 0, 1});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_FALSE(m.warnings.empty());
}

TEST(Predictive, ThresholdConvention) {
  EXPECT_EQ(fa::threshold_labels(std::vector<double>{0.5, 0.4999, 0.75}), (std::vector<int>{1, 0, 1}));
}

TEST(Predictive, AurocMatchesPairwiseOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = random_case(seed, 150);
    EXPECT_NEAR(fa::auroc(c.p, c.y), pairwise_auroc(c.p, c.y), 1e-12);
  }
}

TEST(Predictive, AurocInvariantUnderMonotoneTransform) {
  const auto c = random_case(3, 200);
  std::vector<double> t(c.p.size());
  std::transform(c.p.begin(), c.p.end(), t.begin(), [](double v) { return std::exp(3 * v) - 7; });
  EXPECT_EQ(fa::auroc(c.p, c.y), fa::auroc(t, c.y));
}

TEST(Predictive, RowOrderInvariantAndBounded) {
  const auto c = random_case(4, 120);
  auto p = c.p;
  auto y = c.y;
  std::vector<std::size_t> idx(p.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  fa::Rng rng(1);
  rng.shuffle(idx.begin(), idx.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    p[i] = c.p[idx[i]];
    y[i] = c.y[idx[i]];
  }
  const auto a = fa::predictive_metrics(c.p, c.y);
  const auto b = fa::predictive_metrics(p, y);
  EXPECT_EQ(a.to_json(), b.to_json());
  for (double v : {a.accuracy, a.precision, a.recall, a.f1, *a.auroc}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Eod, CountsExample) {
  Cells c;
  c.add(1, 1, 8, 10);
  c.add(1, 0, 2, 10);
  c.add(0, 1, 5, 10);
  c.add(0, 0, 1, 10);
  const auto e = fa::eod_difference(c.pred, c.y, c.a);
  EXPECT_NEAR(e.tpr_component, 0.3, 1e-15);
  EXPECT_NEAR(e.fpr_component, 0.1, 1e-15);
  EXPECT_NEAR(e.eod, 0.3, 1e-15);
}

TEST(Eod, NegativeComponent) {
  Cells c;
  c.add(1, 1, 5, 10);
  c.add(1, 0, 3, 10);
  c.add(0, 1, 9, 10);
  c.add(0, 0, 3, 10);
  const auto e = fa::eod_difference(c.pred, c.y, c.a);
  EXPECT_NEAR(e.tpr_component, -0.4, 1e-15);
  EXPECT_EQ(e.fpr_component, 0.0);
  EXPECT_NEAR(e.eod, 0.4, 1e-15);
}

TEST(Eod, SymmetricPredictionsGiveZero) {
  Cells c;
  c.add(1, 1, 7, 10);
  c.add(0, 1, 14, 20);
  c.add(1, 0, 1, 10);
  c.add(0, 0, 3, 30);
  EXPECT_EQ(fa::eod_difference(c.pred, c.y, c.a).eod, 0.0);
}

TEST(Eod, EmptyCellNamed) {
  Cells c;
  c.add(1, 1, 7, 10);
  c.add(0, 1, 4, 10);
  c.add(0, 0, 3, 10);
  try {
    fa::eod_difference(c.pred, c.y, c.a);
    FAIL();
  } catch (const fa::Error& e) {
    EXPECT_EQ(e.code(), fa::ErrorCode::kUndefinedRate);
    EXPECT_NE(std::string(e.what()).find("a=1"), std::string::npos) << e.what();
  }
}

TEST(DemographicParity, Examples) {
  Cells c;
  c.add(1, 0, 6, 10);
  c.add(0, 0, 3, 10);
  EXPECT_NEAR(fa::dp_difference(c.pred, c.a), 0.3, 1e-15);
  EXPECT_EQ(fa::dp_difference(std::vector<int>(4, 1), std::vector<int>{0, 1, 0, 1}), 0.0);
  EXPECT_EQ(fa::dp_difference(std::vector<int>{1, 0, 1, 0}, std::vector<int>{0, 0, 1, 1}), 0.0);
  EXPECT_THROW(fa::dp_difference(std::vector<int>{1, 0}, std::vector<int>{0, 0}), fa::Error);
}

TEST(PredictiveParity, Examples) {
  // Group 1: 5 predicted positives, 4 correct. Group 0: 4 predicted, 2 correct.
  const std::vector<int> pred = {1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0};
  const std::vector<int> y = {1, 1, 1, 1, 0, 1, 1, 1, 0, 0, 0};
  const std::vector<int> a = {1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  EXPECT_NEAR(fa::pp_difference(pred, y, a), 0.3, 1e-15);
  const std::vector<int> p2 = {1, 1, 1, 1, 0, 1, 1, 1, 1, 0};
  const std::vector<int> y2 = {1, 1, 1, 0, 0, 1, 1, 1, 0, 1};
  const std::vector<int> a2 = {1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  EXPECT_NEAR(fa::pp_difference(p2, y2, a2), 0.0, 1e-15);
  try {
    fa::pp_difference(std::vector<int>{1, 0, 0}, std::vector<int>{1, 1, 0}, std::vector<int>{1, 0, 0});
    FAIL();
  } catch (const fa::Error& e) {
    EXPECT_EQ(e.code(), fa::ErrorCode::kUndefinedRate);
  }
}

TEST(Fairness, GroupSwapNegatesSignedValues) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = random_case(seed + 100, 200);
    const auto pred = fa::threshold_labels(c.p);
    std::vector<int> swapped(c.a.size());
    for (std::size_t i = 0; i < c.a.size(); ++i) swapped[i] = 1 - c.a[i];
    const auto f = fa::fairness_metrics(pred, c.y, c.a);
    const auto g = fa::fairness_metrics(pred, c.y, swapped);
    EXPECT_EQ(f.eod, g.eod);
    EXPECT_EQ(f.eod_tpr_component, -g.eod_tpr_component);
    EXPECT_EQ(f.eod_fpr_component, -g.eod_fpr_component);
    EXPECT_EQ(f.dp_difference, -g.dp_difference);
    ASSERT_TRUE(f.pp_difference && g.pp_difference);
    EXPECT_EQ(*f.pp_difference, -*g.pp_difference);
    EXPECT_GE(f.eod, 0.0);
    EXPECT_LE(f.eod, 1.0);
  }
}

TEST(Fairness, JsonLayout) {
  Cells c;
  c.add(1, 1, 8, 10);
  c.add(1, 0, 2, 10);
  c.add(0, 1, 5, 10);
  c.add(0, 0, 0, 10);
  const auto f = fa::fairness_metrics(c.pred, c.y, c.a);
  const auto j = f.to_json();
  EXPECT_NEAR(j.at("eod").get<double>(), 0.3, 1e-15);
  EXPECT_TRUE(j.at("groups").contains("black"));
  EXPECT_TRUE(j.at("groups").contains("nonblack"));
  EXPECT_NEAR(*f.groups[1].tpr, 0.8, 1e-15);
  EXPECT_NEAR(*f.groups[0].fpr, 0.0, 1e-15);
}

TEST(MetricTable, NamesDirectionAndLookup) {
  EXPECT_EQ(fa::metric_names(), (std::vector<std::string>{"accuracy", "precision", "recall", "f1", "auroc", "eod",
                                                          "dp_difference", "pp_difference"}));
  EXPECT_TRUE(fa::higher_is_better("accuracy"));
  EXPECT_TRUE(fa::higher_is_better("auroc"));
  EXPECT_FALSE(fa::higher_is_better("eod"));
  EXPECT_FALSE(fa::higher_is_better("pp_difference"));
  const auto c = random_case(7, 100);
  const auto pred = fa::threshold_labels(c.p);
  const auto p = fa::predictive_metrics(c.p, c.y);
  const auto f = fa::fairness_metrics(pred, c.y, c.a);
  EXPECT_EQ(fa::metric_value(p, f, "f1"), p.f1);
  EXPECT_EQ(fa::metric_value(p, f, "eod"), f.eod);
  const auto j = fa::metrics_json(p, f);
  for (const auto& name : fa::metric_names()) EXPECT_TRUE(j.contains(name)) << name;
}
