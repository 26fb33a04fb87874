#include <algorithm>
#include <numeric>

#include "fairaudit/detail/learners.hpp"

namespace fairaudit::detail {

namespace {

// Second-order split search on (gradient, hessian) sums.
struct NewtonBuilder {
  const Matrix& x;
  const std::vector<double>& grad;
  const std::vector<double>& hess;
  const BoostedParams& params;
  Tree tree;

  double score(double g, double h) const { return g * g / (h + params.l2_leaf); }

  int build(std::vector<std::size_t>& rows, int depth) {
    double g = 0.0, h = 0.0;
    for (auto i : rows) {
      g += grad[i];
      h += hess[i];
    }
    const int id = static_cast<int>(tree.nodes.size());
    const double leaf = -g / (h + params.l2_leaf) * params.learning_rate;
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, leaf, h});
    if (depth >= params.max_depth || rows.size() < 2) return id;

    const double parent = score(g, h);
    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order;
    for (int f = 0; f < static_cast<int>(x.cols()); ++f) {
      order = rows;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x(static_cast<Eigen::Index>(a), f) < x(static_cast<Eigen::Index>(b), f);
      });
      double lg = 0.0, lh = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const auto i = order[k];
        lg += grad[i];
        lh += hess[i];
        const double xv = x(static_cast<Eigen::Index>(i), f);
        const double next = x(static_cast<Eigen::Index>(order[k + 1]), f);
        if (!(xv < next)) continue;
        if (lh < params.min_child_weight || h - lh < params.min_child_weight) continue;
        const double gain = score(lg, lh) + score(g - lg, h - lh) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (xv + next);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : rows) {
      (x(static_cast<Eigen::Index>(i), best_feature) <= best_threshold ? left : right).push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

BoostedState fit_boosted(const Matrix& x, std::span<const int> y, std::span<const double> w,
                         const BoostedParams& params) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto weight = normalized_weights(w);
  double tw = 0.0, twy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tw += weight[i];
    twy += weight[i] * y[i];
  }
  const double base_rate = twy / tw;

  BoostedState state;
  state.base_margin = std::log(base_rate / (1.0 - base_rate));
  std::vector<double> margin(n, state.base_margin), grad(n), hess(n);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i) {
    if (weight[i] > 0) active.push_back(i);
  }

  for (int round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = weight[i] * (p - y[i]);
      hess[i] = weight[i] * p * (1.0 - p);
    }
    NewtonBuilder builder{x, grad, hess, params, {}};
    std::vector<std::size_t> rows = active;
    builder.build(rows, 0);
    for (std::size_t i = 0; i < n; ++i) margin[i] += builder.tree.predict(row_span(x, static_cast<Eigen::Index>(i)));
    state.trees.push_back(std::move(builder.tree));
  }
  return state;
}

}  // namespace fairaudit::detail
