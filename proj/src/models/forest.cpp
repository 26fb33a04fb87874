#include <algorithm>
#include <numeric>

#include "fairaudit/detail/learners.hpp"

namespace fairaudit::detail {

namespace {

struct GiniBuilder {
  const Matrix& x;
  std::span<const int> y;
  std::vector<double> weight;  // bootstrap multiplicity times sample weight
  const ForestParams& params;
  int max_features;
  Rng& rng;
  Tree tree;

  struct Candidate {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
    std::size_t left_count = 0;
  };

  static double gini_mass(double w, double wy) {
    if (w <= 0) return 0.0;
    const double p = wy / w;
    return 2.0 * w * p * (1.0 - p);
  }

  int build(std::vector<std::size_t>& rows, int depth) {
    double w = 0.0, wy = 0.0;
    for (auto i : rows) {
      w += weight[i];
      wy += weight[i] * y[i];
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, w > 0 ? wy / w : 0.0, w});

    const auto min_leaf = static_cast<std::size_t>(params.min_samples_leaf);
    const double parent = gini_mass(w, wy);
    if (depth >= params.max_depth || rows.size() < 2 * min_leaf || parent <= 1e-12 * w) return id;

    std::vector<int> features(static_cast<std::size_t>(x.cols()));
    std::iota(features.begin(), features.end(), 0);
    // Partial Fisher-Yates: the first max_features entries are the sample.
    for (int k = 0; k < max_features; ++k) {
      const auto pick = static_cast<std::size_t>(k) + rng.index(features.size() - static_cast<std::size_t>(k));
      std::swap(features[static_cast<std::size_t>(k)], features[pick]);
    }

    Candidate best;
    best.score = parent - 1e-12 * w;
    std::vector<std::size_t> order;
    for (int k = 0; k < max_features; ++k) {
      const int f = features[static_cast<std::size_t>(k)];
      order = rows;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x(static_cast<Eigen::Index>(a), f) < x(static_cast<Eigen::Index>(b), f);
      });
      double lw = 0.0, lwy = 0.0;
      for (std::size_t k2 = 0; k2 + 1 < order.size(); ++k2) {
        const auto i = order[k2];
        lw += weight[i];
        lwy += weight[i] * y[i];
        const double xv = x(static_cast<Eigen::Index>(i), f);
        const double next = x(static_cast<Eigen::Index>(order[k2 + 1]), f);
        if (!(xv < next)) continue;
        const std::size_t left_count = k2 + 1;
        if (left_count < min_leaf || order.size() - left_count < min_leaf) continue;
        const double score = gini_mass(lw, lwy) + gini_mass(w - lw, wy - lwy);
        if (score < best.score) {
          best = Candidate{f, 0.5 * (xv + next), score, left_count};
        }
      }
    }
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : rows) {
      (x(static_cast<Eigen::Index>(i), best.feature) <= best.threshold ? left : right).push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

ForestState fit_forest(const Matrix& x, std::span<const int> y, std::span<const double> w,
                       const ForestParams& params) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<int>(x.cols());
  const auto base = normalized_weights(w);
  int max_features = params.max_features > 0
                         ? std::min(params.max_features, d)
                         : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  max_features = std::max(1, max_features);

  ForestState state;
  state.trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));
    std::vector<double> multiplicity(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) multiplicity[rng.index(n)] += 1.0;

    GiniBuilder builder{x, y, std::vector<double>(n), params, max_features, rng, {}};
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      builder.weight[i] = multiplicity[i] * base[i];
      if (builder.weight[i] > 0) rows.push_back(i);
    }
    if (rows.empty()) {
      // Every drawn row had zero weight; fall back to the weighted base rate.
      double tw = 0.0, twy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        tw += base[i];
        twy += base[i] * y[i];
      }
      Tree leaf;
      leaf.nodes.push_back(TreeNode{-1, 0.0, -1, -1, twy / tw, tw});
      state.trees.push_back(std::move(leaf));
      continue;
    }
    builder.build(rows, 0);
    state.trees.push_back(std::move(builder.tree));
  }
  return state;
}

}  // namespace fairaudit::detail
