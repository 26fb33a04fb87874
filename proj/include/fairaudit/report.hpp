#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairaudit/data.hpp"
#include "fairaudit/explain.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/mitigate.hpp"
#include "fairaudit/models.hpp"
#include "fairaudit/stats.hpp"

namespace fairaudit {

/// Either a CSV file plus schema or the synthetic fixture generator.
struct DatasetSource {
  std::string path;  // as written in the config
  std::filesystem::path resolved_path;
  DatasetSchema schema;

  bool synthetic = false;
  std::size_t synth_n = 2000;
  std::size_t synth_d = 8;
  double synth_bias = 1.0;
  std::uint64_t synth_seed = 0;
};

struct ExplainSettings {
  std::size_t background_size = 100;
  std::size_t n_coalitions = 2048;
  /// Per-kind estimator overrides for the baseline models.
  std::map<ModelKind, Estimator> overrides;
  Estimator mixture_estimator = Estimator::kKernel;
  unsigned threads = 1;
};

struct AuditConfig {
  std::string name;  // dataset label used in the CSV outputs
  DatasetSource dataset;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  /// Split seed; falls back to `seed`.
  std::optional<std::uint64_t> split_seed;
  std::vector<ModelKind> models;
  /// Raw hyperparameter objects per kind. A kind without an explicit "seed"
  /// gets one derived from `seed`.
  std::map<ModelKind, nlohmann::json> hyperparameters;
  bool mitigate = true;
  EgConfig eg;
  ExplainSettings explain;
  std::string output_dir = "audit_out";
  std::filesystem::path resolved_output_dir = "audit_out";

  /// Throws kConfig.
  void validate() const;
  ModelSpec spec_for(ModelKind kind) const;
  std::uint64_t effective_split_seed() const { return split_seed.value_or(seed); }

  /// Canonical form with every default filled in; relative paths as written.
  nlohmann::json to_json() const;
  /// Relative paths resolve against base_dir.
  static AuditConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
  static AuditConfig load(const std::filesystem::path& path);
  /// FNV-1a of the canonical JSON.
  std::string hash() const;
};

struct MetricDelta {
  std::string metric;
  std::optional<double> baseline;
  std::optional<double> mitigated;
  std::string tag;  // improve, decline, unchanged, undefined
};

/// Strict comparison with a 1e-12 equality band. Fairness differences compare
/// magnitudes, lower being better.
std::string delta_tag(const std::string& metric, std::optional<double> baseline,
                      std::optional<double> mitigated);

struct VariantResult {
  PredictiveMetrics predictive;
  FairnessMetrics fairness;
  std::vector<GlobalImportance> importance;  // overall, black, nonblack
  std::optional<ShapMatrix> shap;
};

struct ModelAudit {
  ModelKind kind = ModelKind::kLogistic;
  bool succeeded = false;
  std::string failed_stage;
  std::string error;
  std::string error_code;

  std::optional<TrainedModel> baseline_model;
  std::optional<MixtureModel> mitigated_model;
  std::optional<VariantResult> baseline;
  std::optional<VariantResult> mitigated;
  std::vector<MetricDelta> deltas;
  std::vector<RankComparison> rank_comparisons;
  Estimator baseline_estimator = Estimator::kExact;
  Estimator mitigated_estimator = Estimator::kKernel;
};

struct AuditReport {
  AuditConfig config;
  std::string dataset_name;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::vector<std::string> feature_names;
  std::string background_fingerprint;
  std::vector<std::string> warnings;
  std::vector<ModelAudit> models;
  /// Test split and the schema it reloads with; written as test.csv.
  Dataset test;
  DatasetSchema test_schema;

  bool all_succeeded() const;
  bool any_failed() const;
  nlohmann::json to_json() const;
};

/// Loads or generates the dataset named by the config.
Dataset load_source(const AuditConfig& cfg);

/// Schema for writing generated data: features as named, label column
/// "label", protected column "race" with values Black / non-Black.
DatasetSchema synthetic_schema(const Dataset& data);

/// Runs every requested model kind. Dataset errors throw; stage errors inside a
/// kind are recorded on that kind. max_threads = 0 reads AUDIT_THREADS
/// (default 1).
AuditReport run_audit(const AuditConfig& cfg, unsigned max_threads = 0);

/// Thread cap from AUDIT_THREADS; 1 when unset or invalid.
unsigned audit_threads_from_env();

/// Writes the report files into out_dir through a temporary sibling
/// directory. An existing out_dir is replaced only if it holds a previous
/// report (or is empty).
void emit(const AuditReport& report, const std::filesystem::path& out_dir);

std::string render_summary(const AuditReport& report);

}  // namespace fairaudit
