#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fairaudit {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  static ConfusionCounts from(std::span<const int> predictions, std::span<const int> labels);
};

/// Labels at the 0.5 cutoff (0.5 itself maps to 1).
std::vector<int> threshold_labels(std::span<const double> probas);

/// Rank statistic with midrank credit for ties. Throws kUndefinedRate when
/// only one class is present.
double auroc(std::span<const double> probas, std::span<const int> labels);

struct PredictiveMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Empty when the labels hold a single class.
  std::optional<double> auroc;
  std::size_t n = 0;
  ConfusionCounts confusion;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Precision is 0 (with a warning) when nothing is predicted positive; recall
/// likewise when there are no positive labels.
PredictiveMetrics predictive_metrics(std::span<const double> probas, std::span<const int> labels);

struct EodComponents {
  double tpr_component = 0.0;  // P(Yhat=1 | Y=1, A=1) - P(Yhat=1 | Y=1, A=0)
  double fpr_component = 0.0;  // same at Y=0
  double eod = 0.0;            // max of the absolute components
};

/// Throws kUndefinedRate naming the empty (a, y) cell.
EodComponents eod_difference(std::span<const int> predictions, std::span<const int> labels,
                             std::span<const int> groups);

/// P(Yhat=1 | A=1) - P(Yhat=1 | A=0).
double dp_difference(std::span<const int> predictions, std::span<const int> groups);

/// PPV(A=1) - PPV(A=0). Throws kUndefinedRate when a group has no predicted
/// positives.
double pp_difference(std::span<const int> predictions, std::span<const int> labels,
                     std::span<const int> groups);

struct GroupRates {
  std::size_t n = 0;
  double positive_rate = 0.0;
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> ppv;
  ConfusionCounts confusion;
};

struct FairnessMetrics {
  double eod = 0.0;
  double eod_tpr_component = 0.0;
  double eod_fpr_component = 0.0;
  double dp_difference = 0.0;
  /// Empty when a group has no predicted positives.
  std::optional<double> pp_difference;
  std::array<GroupRates, 2> groups;  // indexed by a
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

FairnessMetrics fairness_metrics(std::span<const int> predictions, std::span<const int> labels,
                                 std::span<const int> groups);

/// Flat object keyed by metric name; absent optional values are null.
nlohmann::json metrics_json(const PredictiveMetrics& p, const FairnessMetrics& f);

/// Metric names in report order.
const std::vector<std::string>& metric_names();
/// Value of a named metric; empty for an undefined optional metric.
std::optional<double> metric_value(const PredictiveMetrics& p, const FairnessMetrics& f,
                                   const std::string& name);
/// True for metrics where larger is better (everything except the fairness
/// differences, where smaller magnitude is better).
bool higher_is_better(const std::string& name);

}  // namespace fairaudit
