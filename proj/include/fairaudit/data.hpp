#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fairaudit/common.hpp"

namespace fairaudit {

/// Column layout of a tabular CSV and the mapping of the raw protected
/// attribute onto the binary group indicator (1 = Black, 0 = non-Black).
struct DatasetSchema {
  std::vector<std::string> feature_columns;
  std::string label_column;
  std::string protected_column;
  std::vector<std::string> protected_positive_values;
  std::vector<std::string> protected_negative_values;
  bool include_protected_as_feature = false;

  /// Throws kSchema on any violated invariant.
  void validate() const;

  static DatasetSchema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static DatasetSchema load(const std::filesystem::path& path);

  /// Race mapping used for the public COMPAS recidivism table.
  static DatasetSchema compas_race_mapping();
  /// Race mapping used for the anticoagulant bleeding cohort.
  static DatasetSchema afib_race_mapping();
};

/// Returns 1 for a positive-group value, 0 for a negative-group value and
/// throws kMapping for anything else.
int binarize_protected(const std::string& raw, const DatasetSchema& schema);

/// Immutable feature matrix plus labels and group indicators.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Matrix x, std::vector<int> y, std::vector<int> a,
          std::vector<std::string> feature_names, std::vector<std::string> row_ids);

  const Matrix& x() const { return x_; }
  const std::vector<int>& y() const { return y_; }
  const std::vector<int>& a() const { return a_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& row_ids() const { return row_ids_; }

  std::size_t rows() const { return y_.size(); }
  std::size_t features() const { return feature_names_.size(); }
  std::span<const double> row(std::size_t i) const {
    return row_span(x_, static_cast<Eigen::Index>(i));
  }

  /// Rows in the given order; indices must be in range.
  Dataset subset(std::span<const std::size_t> indices) const;

  /// Copy with labels replaced (same length, 0/1 only).
  Dataset with_labels(std::vector<int> y) const;

 private:
  Matrix x_;
  std::vector<int> y_;
  std::vector<int> a_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> row_ids_;
};

/// Row ids are the 1-based data-row numbers of the file.
Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema);

/// Writes feature columns, label and protected column. The protected column
/// holds the first listed raw value of each group so the file reloads with the
/// same schema.
void save_dataset(const Dataset& data, const std::filesystem::path& path,
                  const DatasetSchema& schema);

struct Split {
  Dataset train;
  Dataset test;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  /// True when some (y, a) stratum was too small and stratification fell
  /// back to y alone.
  bool stratified_on_label_only = false;
  std::vector<std::string> warnings;
};

/// Stratified on (y, a); deterministic for a fixed seed.
Split split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// Synthetic binary-feature fixture with a group-correlated proxy feature.
/// bias_strength = 0 gives data whose features and labels are independent of
/// the group.
Dataset synth_biased(std::size_t n, std::size_t d, double bias_strength, std::uint64_t seed);

}  // namespace fairaudit
