#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fairaudit {

/// Binary tree node. Internal nodes route x[feature] <= threshold to `left`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  /// Training weight (forest) or hessian mass (boosted) reaching the node.
  double cover = 0.0;

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int leaf_index(std::span<const double> x) const {
    int n = 0;
    while (!nodes[n].is_leaf()) {
      n = x[nodes[n].feature] <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
    }
    return n;
  }
  double predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }
  int depth() const;

  /// Single split on `feature`: x <= threshold gives `low`, otherwise `high`.
  static Tree stump(int feature, double threshold, double low, double high);

  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);
};

}  // namespace fairaudit
