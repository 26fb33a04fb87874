#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fairaudit/data.hpp"
#include "fairaudit/models.hpp"

namespace fairaudit {

/// Constants of the exponentiated-gradient reduction.
struct EgConfig {
  double eps = 0.01;   // constraint slack
  int max_iters = 50;  // T
  double eta = 2.0;    // multiplicative-weights step; the applied step is eta / bound
  double bound = 100;  // l1 cap on the dual vector
  double nu = 1e-6;    // duality-gap stopping tolerance

  void validate() const;
  nlohmann::json to_json() const;
  static EgConfig from_json(const nlohmann::json& j);
};

inline constexpr std::size_t kMomentCount = 8;
using MomentArray = std::array<double, kMomentCount>;

/// Equalized-odds moments: for every (group a, outcome y) the deviation of
/// P(Yhat=1 | A=a, Y=y) from the pooled P(Yhat=1 | Y=y), once with each sign.
/// Values are stored before the slack is subtracted.
struct MomentVector {
  MomentArray gamma{};

  /// Index layout: 4 * y + 2 * a + (negative ? 1 : 0).
  static constexpr std::size_t index(int a, int y, bool negative) {
    return static_cast<std::size_t>(4 * y + 2 * a + (negative ? 1 : 0));
  }
  double at(int a, int y, bool negative) const { return gamma[index(a, y, negative)]; }
  MomentArray violations(double eps) const;
  double max_violation(double eps) const;
};

/// Works on hard labels or on per-row probabilities of predicting 1.
MomentVector eod_moments(std::span<const int> predictions, const Dataset& data);
MomentVector eod_moments(std::span<const double> predictions, const Dataset& data);

/// Weighted binary problem whose solution minimises the Lagrangian for fixed
/// duals.
struct RelabeledProblem {
  std::vector<int> labels;
  std::vector<double> weights;
  /// cost(predict 1) - cost(predict 0) per row.
  std::vector<double> cost_difference;
};

/// bound <= 0 skips the l1 check.
RelabeledProblem cost_sensitive_relabel(const MomentArray& lambda, const Dataset& data,
                                        double bound = 0.0);

struct EgIteration {
  int iteration = 0;
  MomentArray lambda{};
  MomentArray gamma{};  // moments of this iteration's best response
  double loss = 0.0;    // training 0-1 error of the best response
  double gap = 0.0;     // duality gap of the running mixture
  double mixture_max_violation = 0.0;
  int best_response = 0;  // index into the oracle-call list
};

/// Deterministic mixture: the weighted average of member probabilities.
class MixtureModel final : public Predictor {
 public:
  MixtureModel(std::vector<TrainedModel> members, std::vector<double> weights);

  double predict_proba(std::span<const double> x) const override;
  using Predictor::predict_proba;
  std::size_t feature_count() const override { return members_.front().feature_count(); }

  const std::vector<TrainedModel>& members() const { return members_; }
  const std::vector<double>& weights() const { return weights_; }

  std::vector<EgIteration> history;
  double final_gap = 0.0;
  bool early_stopped = false;
  /// "uniform" or "linear_program".
  std::string selection = "uniform";
  /// Dual vector each member was trained against.
  std::vector<MomentArray> member_lambdas;
  /// Oracle-call index of each member.
  std::vector<int> member_calls;
  /// Every oracle call made during the run, in order.
  std::vector<MomentArray> oracle_lambdas;
  EgConfig config;

  nlohmann::json to_json() const;
  static MixtureModel from_json(const nlohmann::json& j);

 private:
  std::vector<TrainedModel> members_;
  std::vector<double> weights_;
};

/// Exponentiated-gradient reduction for the equalized-odds constraint.
MixtureModel exponentiated_gradient(const ModelSpec& spec, const Dataset& train,
                                    const EgConfig& cfg);

/// One JSON object per iteration plus a closing "mixture" record.
void write_trace(const MixtureModel& mixture, const std::filesystem::path& path);

/// Re-trains every member from the trace's recorded duals and rebuilds the
/// mixture. Throws kParse if a re-trained best response does not reproduce the
/// recorded loss and moments.
MixtureModel replay_trace(const std::filesystem::path& path, const ModelSpec& spec,
                          const Dataset& train);

}  // namespace fairaudit
