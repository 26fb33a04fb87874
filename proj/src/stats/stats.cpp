#include "fairaudit/stats.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

namespace fairaudit {

namespace {

// Counts of sum(d_i^2) over all d! permutations of 1..d against the identity.
const std::vector<double>& null_distribution(std::size_t d) {
  static std::mutex mutex;
  static std::map<std::size_t, std::vector<double>> cache;
  const std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(d);
  if (it != cache.end()) return it->second;
  const std::size_t max_sum = d * (d * d - 1) / 3;
  std::vector<double> counts(max_sum + 1, 0.0);
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    std::size_t s = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const auto diff = static_cast<long>(perm[i]) - static_cast<long>(i);
      s += static_cast<std::size_t>(diff * diff);
    }
    counts[s] += 1.0;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return cache.emplace(d, std::move(counts)).first->second;
}

template <typename F>
auto with_group(GroupFilter g, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    fail(e.code(), "group '" + to_string(g) + "': " + e.what());
  }
}

}  // namespace

std::vector<double> descending_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && values[order[end]] == values[order[start]]) ++end;
    const double avg = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = avg;
    start = end;
  }
  return ranks;
}

FeatureRanking rank_features(const GlobalImportance& importance) {
  require(importance.importance.size() >= 2, ErrorCode::kTooFewFeatures,
          "ranking needs at least 2 features (got " + std::to_string(importance.importance.size()) + ")");
  for (double v : importance.importance) {
    require(std::isfinite(v) && v >= 0, ErrorCode::kPrecondition, "importances must be finite and non-negative");
  }
  return {descending_ranks(importance.importance), importance.feature_names, importance.group};
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::kShape, "rankings have different lengths");
  require(a.size() >= 2, ErrorCode::kTooFewFeatures, "correlation needs at least 2 features");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  require(saa > 0 && sbb > 0, ErrorCode::kUndefinedCorrelation, "correlation undefined: a ranking is constant");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman_rho(const FeatureRanking& a, const FeatureRanking& b) { return spearman_rho(a.ranks, b.ranks); }

SpearmanTest spearman_test(double rho, std::size_t d) {
  require(d >= 4, ErrorCode::kPrecondition, "spearman test needs d >= 4 (got " + std::to_string(d) + ")");
  require(std::isfinite(rho) && rho >= -1.0 && rho <= 1.0, ErrorCode::kPrecondition, "rho must lie in [-1, 1]");
  SpearmanTest out;
  if (d <= kExactPermutationLimit) {
    const auto& counts = null_distribution(d);
    const double dd = static_cast<double>(d);
    const double denom = dd * (dd * dd - 1.0);
    double tail = 0.0, total = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      total += counts[s];
      const double r = 1.0 - 6.0 * static_cast<double>(s) / denom;
      if (std::abs(r) >= std::abs(rho) - 1e-12) tail += counts[s];
    }
    out.p_value = tail / total;
    out.exact = true;
    return out;
  }
  if (std::abs(rho) >= 1.0) {
    out.p_value = DBL_MIN;
    out.saturated = true;
    return out;
  }
  const double df = static_cast<double>(d) - 2.0;
  const double t = std::abs(rho) * std::sqrt(df / (1.0 - rho * rho));
  const boost::math::students_t dist(df);
  out.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
  if (out.p_value <= 0.0) {
    out.p_value = DBL_MIN;
    out.saturated = true;
  }
  return out;
}

double spearman_pvalue(double rho, std::size_t d) { return spearman_test(rho, d).p_value; }

std::string to_string(StabilityFlag f) {
  switch (f) {
    case StabilityFlag::kStable: return "stable";
    case StabilityFlag::kDag: return "dag";
    case StabilityFlag::kDdag: return "ddag";
  }
  return "unknown";
}

StabilityFlag stability_flag(double p_value) {
  if (p_value > 0.01) return StabilityFlag::kDag;
  if (p_value > 0.001) return StabilityFlag::kDdag;
  return StabilityFlag::kStable;
}

nlohmann::json RankComparison::to_json() const {
  return {{"group", to_string(group)},
          {"rho", rho},
          {"p_value", p_value},
          {"n_features", n_features},
          {"flag", to_string(flag)},
          {"exact", exact},
          {"saturated", saturated},
          {"pre_ranks", pre.ranks},
          {"post_ranks", post.ranks}};
}

RankComparison compare_importances(const GlobalImportance& pre, const GlobalImportance& post) {
  require(pre.feature_names == post.feature_names, ErrorCode::kShape, "pre and post features differ");
  RankComparison c;
  c.group = pre.group;
  c.pre = rank_features(pre);
  c.post = rank_features(post);
  c.n_features = c.pre.ranks.size();
  c.rho = spearman_rho(c.pre, c.post);
  const auto test = spearman_test(c.rho, c.n_features);
  c.p_value = test.p_value;
  c.exact = test.exact;
  c.saturated = test.saturated;
  c.flag = stability_flag(c.p_value);
  return c;
}

std::vector<RankComparison> compare_rankings(const ShapMatrix& pre, const ShapMatrix& post, const Dataset& test) {
  require(pre.row_ids == post.row_ids, ErrorCode::kShape, "pre and post matrices explain different rows");
  require(pre.feature_names == post.feature_names, ErrorCode::kShape, "pre and post matrices have different features");
  std::vector<RankComparison> out;
  for (GroupFilter g : kAllGroups) {
    out.push_back(with_group(g, [&] {
      return compare_importances(global_importance(pre, test, g), global_importance(post, test, g));
    }));
  }
  return out;
}

}  // namespace fairaudit
