#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fairaudit/common.hpp"
#include "fairaudit/data.hpp"
#include "fairaudit/tree.hpp"

namespace fairaudit {

enum class ModelKind { kLogistic = 0, kForest = 1, kBoosted = 2, kNeural = 3 };

std::string_view to_string(ModelKind kind);
/// Accepts "logistic", "forest", "boosted", "neural"; throws kConfig otherwise.
ModelKind parse_model_kind(std::string_view name);
inline bool is_tree_kind(ModelKind k) { return k == ModelKind::kForest || k == ModelKind::kBoosted; }

struct LogisticParams {
  double l2 = 1e-4;
  int max_iterations = 100;
  double tolerance = 1e-8;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 6;
  int min_samples_leaf = 1;
  std::uint64_t seed = 0;
  /// Features tried per split; 0 means ceil(sqrt(d)).
  int max_features = 0;
};

struct BoostedParams {
  /// Zero rounds is allowed and yields the base-rate model.
  int n_rounds = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double l2_leaf = 1.0;
  double min_child_weight = 1.0;
};

struct NeuralParams {
  int hidden_width = 16;
  int epochs = 300;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  double l2 = 1e-4;
};

struct ModelSpec {
  std::variant<LogisticParams, ForestParams, BoostedParams, NeuralParams> params;

  ModelKind kind() const { return static_cast<ModelKind>(params.index()); }
  static ModelSpec defaults(ModelKind kind);
  /// Returns a copy with every seed field replaced.
  ModelSpec with_seed(std::uint64_t seed) const;
  void validate() const;

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

/// Non-negative per-row training weights with positive total.
class SampleWeights {
 public:
  explicit SampleWeights(std::vector<double> w);
  static SampleWeights uniform(std::size_t n) { return SampleWeights(std::vector<double>(n, 1.0)); }

  const std::vector<double>& values() const { return w_; }
  std::size_t size() const { return w_.size(); }
  double total() const;

 private:
  std::vector<double> w_;
};

/// Anything that maps a feature vector to P(y = 1).
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual double predict_proba(std::span<const double> x) const = 0;
  virtual std::size_t feature_count() const = 0;

  /// Label at the 0.5 cutoff; a probability of exactly 0.5 maps to 1.
  int predict_label(std::span<const double> x) const { return predict_proba(x) >= 0.5 ? 1 : 0; }

  std::vector<double> predict_proba(const Matrix& x) const;
  std::vector<int> predict_labels(const Matrix& x) const;

 protected:
  void check_shape(std::span<const double> x) const;
};

struct LogisticState {
  Vector coef;
  double intercept = 0.0;
};

struct ForestState {
  std::vector<Tree> trees;
};

/// Tree leaf values live in margin (log-odds) space and already include the
/// learning rate.
struct BoostedState {
  double base_margin = 0.0;
  std::vector<Tree> trees;
};

struct NeuralState {
  Vector input_mean;
  Vector input_scale;
  Matrix hidden_weights;  // width x d
  Vector hidden_bias;
  Vector output_weights;  // width
  double output_bias = 0.0;
};

using ModelState = std::variant<LogisticState, ForestState, BoostedState, NeuralState>;

class TrainedModel final : public Predictor {
 public:
  TrainedModel(ModelSpec spec, std::size_t feature_count, ModelState state,
               std::vector<std::string> feature_names = {});

  double predict_proba(std::span<const double> x) const override;
  using Predictor::predict_proba;
  std::size_t feature_count() const override { return feature_count_; }

  /// Boosted models: log-odds before the sigmoid. Logistic: linear score.
  /// Throws kKind for forest and neural models.
  double margin(std::span<const double> x) const;

  ModelKind kind() const { return spec_.kind(); }
  const ModelSpec& spec() const { return spec_; }
  const ModelState& state() const { return state_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);

 private:
  ModelSpec spec_;
  std::size_t feature_count_;
  ModelState state_;
  std::vector<std::string> feature_names_;
};

/// Fits the model described by spec on (x, y) of `data` with per-row weights.
/// Throws kDegenerateFit when all weight sits on one label.
TrainedModel train(const ModelSpec& spec, const Dataset& data, const SampleWeights& weights);
TrainedModel train(const ModelSpec& spec, const Dataset& data);

}  // namespace fairaudit
