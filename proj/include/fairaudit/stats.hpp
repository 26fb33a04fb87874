#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fairaudit/explain.hpp"

namespace fairaudit {

/// Average ranks in descending order of value: rank 1 is the largest, exact
/// ties share the mean of their positions.
std::vector<double> descending_ranks(std::span<const double> values);

struct FeatureRanking {
  std::vector<double> ranks;
  std::vector<std::string> feature_names;
  GroupFilter group = GroupFilter::kOverall;
};

/// Throws kTooFewFeatures when d < 2.
FeatureRanking rank_features(const GlobalImportance& importance);

/// Pearson correlation of the rank vectors. Throws kUndefinedCorrelation when
/// either ranking has zero variance.
double spearman_rho(std::span<const double> a, std::span<const double> b);
double spearman_rho(const FeatureRanking& a, const FeatureRanking& b);

inline constexpr std::size_t kExactPermutationLimit = 9;

struct SpearmanTest {
  double p_value = 1.0;
  /// Permutation distribution (d <= 9) rather than the t approximation.
  bool exact = false;
  /// |rho| = 1 under the t approximation; p is the smallest positive double.
  bool saturated = false;
};

/// Two-sided test of rho = 0 for d tie-free ranks. Requires d >= 4.
SpearmanTest spearman_test(double rho, std::size_t d);
double spearman_pvalue(double rho, std::size_t d);

/// dag: p > 0.01; ddag: 0.001 < p <= 0.01; stable otherwise.
enum class StabilityFlag { kStable, kDag, kDdag };
std::string to_string(StabilityFlag f);
StabilityFlag stability_flag(double p_value);

struct RankComparison {
  GroupFilter group = GroupFilter::kOverall;
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n_features = 0;
  StabilityFlag flag = StabilityFlag::kStable;
  bool exact = false;
  bool saturated = false;
  FeatureRanking pre;
  FeatureRanking post;

  nlohmann::json to_json() const;
};

RankComparison compare_importances(const GlobalImportance& pre, const GlobalImportance& post);

/// Overall, black and nonblack comparisons, in that order. Errors carry the
/// group name.
std::vector<RankComparison> compare_rankings(const ShapMatrix& pre, const ShapMatrix& post,
                                             const Dataset& test);

}  // namespace fairaudit
