#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairaudit/data.hpp"
#include "fairaudit/models.hpp"

namespace fairaudit {

/// Reference rows that define the interventional baseline.
class Background {
 public:
  explicit Background(Matrix rows);

  /// min(size, n) training rows; all rows in file order when size >= n,
  /// otherwise a seeded sample without replacement (kept in file order).
  static Background sample(const Dataset& data, std::size_t size, std::uint64_t seed);

  const Matrix& rows() const { return rows_; }
  std::size_t size() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(rows_.cols()); }
  /// FNV-1a over the dimensions and the raw row bytes, as 16 hex digits.
  std::string fingerprint() const;

  /// Distinct rows and how often each occurs; the value function averages
  /// over these with multiplicities.
  const Matrix& unique_rows() const { return unique_; }
  const std::vector<double>& multiplicity() const { return multiplicity_; }

 private:
  Matrix rows_;
  Matrix unique_;
  std::vector<double> multiplicity_;
};

enum class Estimator { kExact, kKernel, kTree };

std::string to_string(Estimator e);
/// Throws kConfig for anything but "exact", "kernel" or "tree".
Estimator parse_estimator(const std::string& name);

struct ShapExplanation {
  Vector phi;
  double base_value = 0.0;
  double fx = 0.0;
};

/// Mean over background rows of f(x on S, background elsewhere).
/// `coalition[i]` selects feature i from x.
double value_function(const Predictor& model, std::span<const double> x,
                      const std::vector<bool>& coalition, const Background& bg);

inline constexpr std::size_t kExactFeatureLimit = 15;

/// All 2^d coalitions. Throws kEnumerationLimit when d > 15.
ShapExplanation exact_shap(const Predictor& model, std::span<const double> x, const Background& bg);

/// Shapley-kernel weighted least squares with the efficiency constraint
/// imposed exactly. Enumerates every coalition when n_coalitions >= 2^d - 2,
/// otherwise samples coalition pairs with the given seed.
ShapExplanation kernel_shap(const Predictor& model, std::span<const double> x, const Background& bg,
                            std::size_t n_coalitions, std::uint64_t seed);

/// Interventional tree attribution for forest and boosted models, and for
/// mixtures whose members are all tree models. Boosted attributions are
/// computed on the margin and rescaled to the probability gap; the factor is
/// written to `rescale_factor` when requested.
ShapExplanation tree_shap(const Predictor& model, std::span<const double> x, const Background& bg,
                          double* rescale_factor = nullptr);

struct ShapMatrix {
  Estimator estimator = Estimator::kExact;
  std::vector<std::string> feature_names;
  std::vector<std::string> row_ids;
  Matrix phi;  // rows x d
  std::vector<double> base_values;
  std::vector<double> fx;
  std::uint64_t seed = 0;
  std::size_t background_rows = 0;
  std::string background_fingerprint;
  std::size_t n_coalitions = 0;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t rows() const { return row_ids.size(); }
  ShapExplanation row(std::size_t i) const;

  /// CSV columns: row_id, base_value, fx, phi_<feature>... The JSON sidecar
  /// sits next to the CSV with a .json extension.
  void write(const std::filesystem::path& csv_path) const;
  static ShapMatrix read(const std::filesystem::path& csv_path);
  static std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);
};

struct ExplainParams {
  std::size_t n_coalitions = 2048;
  std::uint64_t seed = 0;
  /// Worker threads for row-level parallelism; results do not depend on it.
  unsigned threads = 1;
};

/// Exact for logistic and neural models up to 15 features, kernel beyond;
/// tree for forest and boosted; kernel for anything else (mixtures).
Estimator default_estimator(const Predictor& model);

/// One explanation per test row. A tree estimator on a model without tree
/// structure is a configuration error.
ShapMatrix explain_testset(const Predictor& model, const Dataset& test, const Background& bg,
                           Estimator estimator, const ExplainParams& params = {});

enum class GroupFilter { kOverall, kBlack, kNonBlack };

std::string to_string(GroupFilter g);
GroupFilter parse_group_filter(const std::string& name);
inline constexpr GroupFilter kAllGroups[] = {GroupFilter::kOverall, GroupFilter::kBlack,
                                             GroupFilter::kNonBlack};

struct GlobalImportance {
  std::vector<double> importance;
  GroupFilter group = GroupFilter::kOverall;
  std::vector<std::string> feature_names;
  std::size_t rows = 0;
};

/// Mean |phi| over the rows of `test` selected by the filter. The matrix rows
/// must be the test rows in order. Throws kEmptyGroup on an empty selection.
GlobalImportance global_importance(const ShapMatrix& matrix, const Dataset& test, GroupFilter group);

}  // namespace fairaudit
