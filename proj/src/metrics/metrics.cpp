#include "fairaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fairaudit/common.hpp"

namespace fairaudit {

namespace {

void check_binary(std::span<const int> v, const char* what) {
  for (int x : v) require(x == 0 || x == 1, ErrorCode::kPrecondition, std::string(what) + " must be 0/1");
}

void check_lengths(std::size_t a, std::size_t b) {
  require(a == b, ErrorCode::kShape, "input lengths differ (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

struct Cell {
  double n = 0.0;
  double positive = 0.0;
};

// cells[2 * y + a]
std::array<Cell, 4> count_cells(std::span<const int> pred, std::span<const int> labels, std::span<const int> groups) {
  std::array<Cell, 4> cells{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto& c = cells[static_cast<std::size_t>(2 * labels[i] + groups[i])];
    c.n += 1.0;
    c.positive += pred[i];
  }
  return cells;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json confusion_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

}  // namespace

ConfusionCounts ConfusionCounts::from(std::span<const int> predictions, std::span<const int> labels) {
  check_lengths(predictions.size(), labels.size());
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == 1) {
      (labels[i] == 1 ? c.tp : c.fp) += 1;
    } else {
      (labels[i] == 1 ? c.fn : c.tn) += 1;
    }
  }
  return c;
}

std::vector<int> threshold_labels(std::span<const double> probas) {
  std::vector<int> out(probas.size());
  for (std::size_t i = 0; i < probas.size(); ++i) out[i] = probas[i] >= 0.5 ? 1 : 0;
  return out;
}

double auroc(std::span<const double> probas, std::span<const int> labels) {
  check_lengths(probas.size(), labels.size());
  check_binary(labels, "labels");
  const std::size_t n = probas.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probas[a] < probas[b]; });
  double positive_rank_sum = 0.0;
  double positives = 0.0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && probas[order[end]] == probas[order[start]]) ++end;
    const double midrank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += midrank;
        positives += 1.0;
      }
    }
    start = end;
  }
  const double negatives = static_cast<double>(n) - positives;
  require(positives > 0 && negatives > 0, ErrorCode::kUndefinedRate, "auroc undefined: labels contain a single class");
  return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

PredictiveMetrics predictive_metrics(std::span<const double> probas, std::span<const int> labels) {
  check_lengths(probas.size(), labels.size());
  require(!labels.empty(), ErrorCode::kPrecondition, "metrics need at least one row");
  check_binary(labels, "labels");
  PredictiveMetrics m;
  m.n = labels.size();
  const auto pred = threshold_labels(probas);
  m.confusion = ConfusionCounts::from(pred, labels);
  const auto& c = m.confusion;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(m.n);
  if (c.tp + c.fp == 0) {
    m.warnings.emplace_back("no predicted positives: precision set to 0");
  } else {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    m.warnings.emplace_back("no positive labels: recall set to 0");
  } else {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  if (m.precision + m.recall > 0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  try {
    m.auroc = auroc(probas, labels);
  } catch (const Error& e) {
    m.warnings.emplace_back(e.what());
  }
  return m;
}

nlohmann::json PredictiveMetrics::to_json() const {
  return {{"accuracy", accuracy}, {"precision", precision}, {"recall", recall}, {"f1", f1},
          {"auroc", optional_json(auroc)}, {"n", n}, {"confusion", confusion_json(confusion)},
          {"warnings", warnings}};
}

EodComponents eod_difference(std::span<const int> predictions, std::span<const int> labels,
                             std::span<const int> groups) {
  check_lengths(predictions.size(), labels.size());
  check_lengths(predictions.size(), groups.size());
  check_binary(predictions, "predictions");
  check_binary(labels, "labels");
  check_binary(groups, "groups");
  const auto cells = count_cells(predictions, labels, groups);
  double rate[4];
  for (int y = 0; y < 2; ++y) {
    for (int a = 0; a < 2; ++a) {
      const auto& c = cells[static_cast<std::size_t>(2 * y + a)];
      require(c.n > 0, ErrorCode::kUndefinedRate,
              "rate undefined: no rows in cell (a=" + std::to_string(a) + ", y=" + std::to_string(y) + ")");
      rate[2 * y + a] = c.positive / c.n;
    }
  }
  EodComponents out;
  out.tpr_component = rate[3] - rate[2];
  out.fpr_component = rate[1] - rate[0];
  out.eod = std::max(std::abs(out.tpr_component), std::abs(out.fpr_component));
  return out;
}

double dp_difference(std::span<const int> predictions, std::span<const int> groups) {
  check_lengths(predictions.size(), groups.size());
  check_binary(predictions, "predictions");
  check_binary(groups, "groups");
  double n[2] = {0, 0}, pos[2] = {0, 0};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    n[groups[i]] += 1.0;
    pos[groups[i]] += predictions[i];
  }
  for (int a = 0; a < 2; ++a) {
    require(n[a] > 0, ErrorCode::kUndefinedRate, "rate undefined: group a=" + std::to_string(a) + " is empty");
  }
  return pos[1] / n[1] - pos[0] / n[0];
}

double pp_difference(std::span<const int> predictions, std::span<const int> labels, std::span<const int> groups) {
  check_lengths(predictions.size(), labels.size());
  check_lengths(predictions.size(), groups.size());
  check_binary(predictions, "predictions");
  check_binary(labels, "labels");
  check_binary(groups, "groups");
  double predicted[2] = {0, 0}, correct[2] = {0, 0};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] != 1) continue;
    predicted[groups[i]] += 1.0;
    correct[groups[i]] += labels[i];
  }
  for (int a = 0; a < 2; ++a) {
    require(predicted[a] > 0, ErrorCode::kUndefinedRate,
            "ppv undefined: group a=" + std::to_string(a) + " has no predicted positives");
  }
  return correct[1] / predicted[1] - correct[0] / predicted[0];
}

FairnessMetrics fairness_metrics(std::span<const int> predictions, std::span<const int> labels,
                                 std::span<const int> groups) {
  FairnessMetrics m;
  const auto eod = eod_difference(predictions, labels, groups);
  m.eod = eod.eod;
  m.eod_tpr_component = eod.tpr_component;
  m.eod_fpr_component = eod.fpr_component;
  m.dp_difference = dp_difference(predictions, groups);
  try {
    m.pp_difference = pp_difference(predictions, labels, groups);
  } catch (const Error& e) {
    m.warnings.emplace_back(e.what());
  }
  for (int a = 0; a < 2; ++a) {
    std::vector<int> p, y;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i] != a) continue;
      p.push_back(predictions[i]);
      y.push_back(labels[i]);
    }
    auto& g = m.groups[static_cast<std::size_t>(a)];
    g.n = p.size();
    g.confusion = ConfusionCounts::from(p, y);
    const auto& c = g.confusion;
    g.positive_rate = static_cast<double>(c.tp + c.fp) / static_cast<double>(g.n);
    g.tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    g.fpr = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
    if (c.tp + c.fp > 0) g.ppv = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  return m;
}

nlohmann::json FairnessMetrics::to_json() const {
  nlohmann::json g = nlohmann::json::object();
  const char* names[2] = {"nonblack", "black"};
  for (std::size_t a = 0; a < 2; ++a) {
    g[names[a]] = {{"n", groups[a].n},
                   {"positive_rate", groups[a].positive_rate},
                   {"tpr", optional_json(groups[a].tpr)},
                   {"fpr", optional_json(groups[a].fpr)},
                   {"ppv", optional_json(groups[a].ppv)},
                   {"confusion", confusion_json(groups[a].confusion)}};
  }
  return {{"eod", eod},
          {"eod_tpr_component", eod_tpr_component},
          {"eod_fpr_component", eod_fpr_component},
          {"dp_difference", dp_difference},
          {"pp_difference", optional_json(pp_difference)},
          {"groups", g},
          {"warnings", warnings}};
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"accuracy", "precision", "recall",        "f1",
                                                 "auroc",    "eod",       "dp_difference", "pp_difference"};
  return names;
}

std::optional<double> metric_value(const PredictiveMetrics& p, const FairnessMetrics& f, const std::string& name) {
  if (name == "accuracy") return p.accuracy;
  if (name == "precision") return p.precision;
  if (name == "recall") return p.recall;
  if (name == "f1") return p.f1;
  if (name == "auroc") return p.auroc;
  if (name == "eod") return f.eod;
  if (name == "dp_difference") return f.dp_difference;
  if (name == "pp_difference") return f.pp_difference;
  fail(ErrorCode::kConfig, "unknown metric '" + name + "'");
}

bool higher_is_better(const std::string& name) {
  return name != "eod" && name != "dp_difference" && name != "pp_difference";
}

nlohmann::json metrics_json(const PredictiveMetrics& p, const FairnessMetrics& f) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& name : metric_names()) out[name] = optional_json(metric_value(p, f, name));
  return out;
}

}  // namespace fairaudit
