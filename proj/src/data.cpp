#include "fairaudit/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fairaudit/csv.hpp"

namespace fairaudit {

namespace {

bool contains(const std::vector<std::string>& values, const std::string& v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

}  // namespace

void DatasetSchema::validate() const {
  require(!feature_columns.empty(), ErrorCode::kSchema, "schema has no feature columns");
  require(!label_column.empty(), ErrorCode::kSchema, "schema has no label column");
  require(!protected_column.empty(), ErrorCode::kSchema, "schema has no protected column");
  std::set<std::string> seen;
  for (const auto& c : feature_columns) {
    require(seen.insert(c).second, ErrorCode::kSchema, "duplicate feature column '" + c + "'");
  }
  require(!contains(feature_columns, label_column), ErrorCode::kSchema,
          "label column '" + label_column + "' listed as a feature");
  require(include_protected_as_feature || !contains(feature_columns, protected_column),
          ErrorCode::kSchema,
          "protected column '" + protected_column +
              "' listed as a feature without include_protected_as_feature");
  require(label_column != protected_column, ErrorCode::kSchema,
          "label and protected column must differ");
  require(!protected_positive_values.empty() && !protected_negative_values.empty(),
          ErrorCode::kSchema, "protected value mapping lists must both be populated");
  for (const auto& v : protected_positive_values) {
    require(!contains(protected_negative_values, v), ErrorCode::kSchema,
            "protected value '" + v + "' mapped to both groups");
  }
}

DatasetSchema DatasetSchema::from_json(const nlohmann::json& j) {
  static const std::set<std::string> kKeys = {
      "feature_columns",           "label_column",
      "protected_column",          "protected_positive_values",
      "protected_negative_values", "include_protected_as_feature"};
  require(j.is_object(), ErrorCode::kSchema, "schema must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    require(kKeys.count(key) > 0, ErrorCode::kSchema, "unknown schema key '" + key + "'");
  }
  DatasetSchema s;
  try {
    s.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
    s.label_column = j.at("label_column").get<std::string>();
    s.protected_column = j.at("protected_column").get<std::string>();
    s.protected_positive_values = j.at("protected_positive_values").get<std::vector<std::string>>();
    s.protected_negative_values = j.at("protected_negative_values").get<std::vector<std::string>>();
    s.include_protected_as_feature = j.value("include_protected_as_feature", false);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("invalid schema: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json DatasetSchema::to_json() const {
  return {{"feature_columns", feature_columns},
          {"label_column", label_column},
          {"protected_column", protected_column},
          {"protected_positive_values", protected_positive_values},
          {"protected_negative_values", protected_negative_values},
          {"include_protected_as_feature", include_protected_as_feature}};
}

DatasetSchema DatasetSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open schema " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, "schema " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

DatasetSchema DatasetSchema::compas_race_mapping() {
  DatasetSchema s;
  s.feature_columns = {"age",          "sex_male",       "juv_fel_count",
                       "juv_misd_count", "juv_other_count", "priors_count",
                       "charge_felony", "age_lt_25",      "race"};
  s.label_column = "two_year_recid";
  s.protected_column = "race";
  s.protected_positive_values = {"African-American", "Black"};
  s.protected_negative_values = {"Caucasian", "Asian", "Hispanic", "Native American", "Other"};
  s.include_protected_as_feature = true;
  return s;
}

DatasetSchema DatasetSchema::afib_race_mapping() {
  DatasetSchema s;
  s.label_column = "major_bleed";
  s.protected_column = "race";
  s.protected_positive_values = {"Black"};
  s.protected_negative_values = {
      "Indian (Asian)", "Vietnamese",    "Other Pacific Islander", "Korean",
      "Hawaiian",       "White",         "Japanese",               "Filipino",
      "Alaska Native",  "Chinese",       "Guam/Chamorro",          "American Indian",
      "Other Asian",    "Samoan",        "Declined",               "Other",
      "Not Specified"};
  return s;
}

int binarize_protected(const std::string& raw, const DatasetSchema& schema) {
  if (contains(schema.protected_positive_values, raw)) return 1;
  if (contains(schema.protected_negative_values, raw)) return 0;
  fail(ErrorCode::kMapping, "protected value '" + raw + "' is not listed in the schema mapping");
}

Dataset::Dataset(Matrix x, std::vector<int> y, std::vector<int> a,
                 std::vector<std::string> feature_names, std::vector<std::string> row_ids)
    : x_(std::move(x)),
      y_(std::move(y)),
      a_(std::move(a)),
      feature_names_(std::move(feature_names)),
      row_ids_(std::move(row_ids)) {
  const auto n = y_.size();
  require(a_.size() == n && row_ids_.size() == n && static_cast<std::size_t>(x_.rows()) == n,
          ErrorCode::kShape, "dataset row counts disagree");
  require(static_cast<std::size_t>(x_.cols()) == feature_names_.size(), ErrorCode::kShape,
          "dataset column count disagrees with feature names");
  require(x_.allFinite(), ErrorCode::kPrecondition, "dataset contains non-finite feature values");
  for (std::size_t i = 0; i < n; ++i) {
    require(y_[i] == 0 || y_[i] == 1, ErrorCode::kPrecondition, "labels must be 0/1");
    require(a_[i] == 0 || a_[i] == 1, ErrorCode::kPrecondition, "groups must be 0/1");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Matrix x(static_cast<Eigen::Index>(indices.size()), x_.cols());
  std::vector<int> y, a;
  std::vector<std::string> ids;
  y.reserve(indices.size());
  a.reserve(indices.size());
  ids.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto i = indices[k];
    require(i < rows(), ErrorCode::kShape, "subset index out of range");
    x.row(static_cast<Eigen::Index>(k)) = x_.row(static_cast<Eigen::Index>(i));
    y.push_back(y_[i]);
    a.push_back(a_[i]);
    ids.push_back(row_ids_[i]);
  }
  return Dataset(std::move(x), std::move(y), std::move(a), feature_names_, std::move(ids));
}

Dataset Dataset::with_labels(std::vector<int> y) const {
  return Dataset(x_, std::move(y), a_, feature_names_, row_ids_);
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  schema.validate();
  require(std::filesystem::exists(path), ErrorCode::kIo, "no such file " + path.string());
  auto records = csv::read_file(path);
  require(!records.empty(), ErrorCode::kSchema, path.string() + " has no header row");
  const auto& header = records.front();

  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(std::string(trim(header[i])), i);
  auto locate = [&](const std::string& name) {
    auto it = column.find(name);
    require(it != column.end(), ErrorCode::kSchema,
            "missing column '" + name + "' in " + path.string());
    return it->second;
  };
  std::vector<std::size_t> feature_idx;
  for (const auto& f : schema.feature_columns) feature_idx.push_back(locate(f));
  const std::size_t label_idx = locate(schema.label_column);
  const std::size_t protected_idx = locate(schema.protected_column);

  const std::size_t d = schema.feature_columns.size();
  std::vector<std::vector<double>> rows;
  std::vector<int> y, a;
  std::vector<std::string> ids;
  std::size_t data_row = 0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty() && header.size() > 1) continue;  // blank line
    ++data_row;
    const std::string where = "row " + std::to_string(data_row);
    require(rec.size() == header.size(), ErrorCode::kParse,
            where + ": expected " + std::to_string(header.size()) + " fields, got " +
                std::to_string(rec.size()));

    const std::string raw_group(trim(rec[protected_idx]));
    require(!raw_group.empty(), ErrorCode::kParse, where + ": empty protected attribute");
    int group;
    try {
      group = binarize_protected(raw_group, schema);
    } catch (const Error& e) {
      fail(ErrorCode::kMapping, where + ": " + e.what());
    }

    std::vector<double> values(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (schema.include_protected_as_feature && feature_idx[j] == protected_idx) {
        values[j] = group;
        continue;
      }
      const auto& cell = rec[feature_idx[j]];
      require(parse_double(cell, values[j]), ErrorCode::kParse,
              where + ": column '" + schema.feature_columns[j] + "' value '" + cell +
                  "' is not a finite number");
    }
    double label;
    require(parse_double(rec[label_idx], label) && (label == 0.0 || label == 1.0),
            ErrorCode::kParse,
            where + ": label '" + rec[label_idx] + "' is not 0 or 1");
    rows.push_back(std::move(values));
    y.push_back(static_cast<int>(label));
    a.push_back(group);
    ids.push_back(std::to_string(data_row));
  }

  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return Dataset(std::move(x), std::move(y), std::move(a), schema.feature_columns, std::move(ids));
}

void save_dataset(const Dataset& data, const std::filesystem::path& path,
                  const DatasetSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  csv::Record header;
  std::vector<std::size_t> written;
  for (std::size_t j = 0; j < data.features(); ++j) {
    if (data.feature_names()[j] == schema.protected_column) continue;
    header.push_back(data.feature_names()[j]);
    written.push_back(j);
  }
  header.push_back(schema.label_column);
  header.push_back(schema.protected_column);
  csv::write_record(out, header);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    csv::Record rec;
    for (auto j : written) rec.push_back(csv::format_double(data.row(i)[j]));
    rec.push_back(std::to_string(data.y()[i]));
    rec.push_back(data.a()[i] ? schema.protected_positive_values.front()
                              : schema.protected_negative_values.front());
    csv::write_record(out, rec);
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

Split split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::kPrecondition,
          "train_fraction must lie in (0, 1)");
  const std::size_t n = data.rows();
  require(n >= 2, ErrorCode::kPrecondition, "split needs at least two rows");
  const auto positives = std::count(data.y().begin(), data.y().end(), 1);
  require(positives > 0 && static_cast<std::size_t>(positives) < n, ErrorCode::kPrecondition,
          "split needs both label classes");

  Split result;
  result.seed = seed;
  result.train_fraction = train_fraction;

  std::array<std::vector<std::size_t>, 4> cells;
  for (std::size_t i = 0; i < n; ++i) cells[2 * data.y()[i] + data.a()[i]].push_back(i);
  std::vector<std::vector<std::size_t>> strata;
  const bool small_cell = std::any_of(cells.begin(), cells.end(),
                                      [](const auto& c) { return c.size() < 2; });
  if (small_cell) {
    result.stratified_on_label_only = true;
    result.warnings.push_back(
        "a (label, group) stratum has fewer than 2 rows; stratifying on label only");
    strata.resize(2);
    for (std::size_t i = 0; i < n; ++i) strata[data.y()[i]].push_back(i);
  } else {
    strata.assign(cells.begin(), cells.end());
  }

  Rng rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& stratum : strata) {
    rng.shuffle(stratum.begin(), stratum.end());
    const auto count = stratum.size();
    auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
    if (count >= 2) take = std::clamp<std::size_t>(take, 1, count - 1);
    train_idx.insert(train_idx.end(), stratum.begin(), stratum.begin() + static_cast<std::ptrdiff_t>(take));
    test_idx.insert(test_idx.end(), stratum.begin() + static_cast<std::ptrdiff_t>(take), stratum.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  result.train = data.subset(train_idx);
  result.test = data.subset(test_idx);
  return result;
}

Dataset synth_biased(std::size_t n, std::size_t d, double bias_strength, std::uint64_t seed) {
  require(n >= 40, ErrorCode::kPrecondition, "synth_biased needs n >= 40");
  require(d >= 2, ErrorCode::kPrecondition, "synth_biased needs d >= 2");
  require(bias_strength >= 0.0 && bias_strength <= 1.0, ErrorCode::kPrecondition,
          "bias_strength must lie in [0, 1]");

  // Feature 0 is a proxy for the group; features 1.. carry the signal with
  // linearly decaying weights.
  constexpr double kProxyShift = 0.4;
  constexpr double kProxyWeight = 1.5;
  constexpr double kGroupLabelNoise = 0.05;
  std::vector<double> weights(d - 1);
  for (std::size_t j = 0; j + 1 < d; ++j) {
    weights[j] = d == 2 ? 1.0 : 1.0 - 0.7 * static_cast<double>(j) / static_cast<double>(d - 2);
  }

  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<int> y(n), a(n);
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    a[i] = rng.bernoulli(0.5) ? 1 : 0;
    const double proxy_p = 0.5 + kProxyShift * bias_strength * (2.0 * a[i] - 1.0);
    x(r, 0) = rng.bernoulli(proxy_p) ? 1.0 : 0.0;
    double logit = kProxyWeight * bias_strength * (2.0 * x(r, 0) - 1.0);
    for (std::size_t j = 1; j < d; ++j) {
      x(r, static_cast<Eigen::Index>(j)) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      logit += weights[j - 1] * (2.0 * x(r, static_cast<Eigen::Index>(j)) - 1.0);
    }
    y[i] = rng.bernoulli(sigmoid(logit)) ? 1 : 0;
    const bool flip = rng.bernoulli(kGroupLabelNoise * bias_strength);
    if (a[i] == 1 && flip) y[i] = 1;
    ids[i] = std::to_string(i + 1);
  }
  std::vector<std::string> names(d);
  for (std::size_t j = 0; j < d; ++j) names[j] = "x" + std::to_string(j);
  return Dataset(std::move(x), std::move(y), std::move(a), std::move(names), std::move(ids));
}

}  // namespace fairaudit
