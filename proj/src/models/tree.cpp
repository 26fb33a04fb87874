#include "fairaudit/tree.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "fairaudit/common.hpp"

namespace fairaudit {

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) {
      best = std::max(best, d[i]);
      continue;
    }
    d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
    d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
  }
  return best;
}

Tree Tree::stump(int feature, double threshold, double low, double high) {
  Tree t;
  t.nodes.resize(3);
  t.nodes[0] = TreeNode{feature, threshold, 1, 2, 0.5 * (low + high), 2.0};
  t.nodes[1] = TreeNode{-1, 0.0, -1, -1, low, 1.0};
  t.nodes[2] = TreeNode{-1, 0.0, -1, -1, high, 1.0};
  return t;
}

nlohmann::json Tree::to_json() const {
  // Column layout keeps model files compact.
  nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                 left = nlohmann::json::array(), right = nlohmann::json::array(),
                 value = nlohmann::json::array(), cover = nlohmann::json::array();
  for (const auto& n : nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
    cover.push_back(n.cover);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},
          {"right", right},     {"value", value},         {"cover", cover}};
}

Tree Tree::from_json(const nlohmann::json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const auto cover = j.at("cover").get<std::vector<double>>();
  const auto n = feature.size();
  require(n > 0 && threshold.size() == n && left.size() == n && right.size() == n &&
              value.size() == n && cover.size() == n,
          ErrorCode::kParse, "tree arrays have inconsistent lengths");
  Tree t;
  t.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool leaf = left[i] < 0;
    require(leaf == (right[i] < 0), ErrorCode::kParse, "tree node has one child");
    if (!leaf) {
      require(left[i] > static_cast<int>(i) && right[i] > static_cast<int>(i) &&
                  left[i] < static_cast<int>(n) && right[i] < static_cast<int>(n) && feature[i] >= 0,
              ErrorCode::kParse, "tree node links are invalid");
    }
    t.nodes[i] = TreeNode{feature[i], threshold[i], left[i], right[i], value[i], cover[i]};
  }
  return t;
}

}  // namespace fairaudit
