// Command-line front end: run, explain, compare, synth.

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "fairaudit/csv.hpp"
#include "fairaudit/report.hpp"

namespace fa = fairaudit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitPartial = 2;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  fa::require(static_cast<bool>(in), fa::ErrorCode::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fa::fail(fa::ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

std::unique_ptr<fa::Predictor> load_model(const std::filesystem::path& path) {
  const auto j = read_json(path);
  const auto format = j.value("format", std::string());
  if (format == "fairaudit-model") return std::make_unique<fa::TrainedModel>(fa::TrainedModel::from_json(j));
  if (format == "fairaudit-mixture") return std::make_unique<fa::MixtureModel>(fa::MixtureModel::from_json(j));
  fa::fail(fa::ErrorCode::kParse, path.string() + " is not a saved fairaudit model");
}

// Feature columns only; labels and groups are zero-filled.
fa::Dataset load_features(const std::filesystem::path& path, const std::vector<std::string>& names) {
  const auto records = fa::csv::read_file(path);
  fa::require(!records.empty(), fa::ErrorCode::kParse, path.string() + ": empty file");
  const auto& header = records.front();
  std::vector<std::size_t> cols;
  for (const auto& name : names) {
    const auto it = std::find(header.begin(), header.end(), name);
    fa::require(it != header.end(), fa::ErrorCode::kSchema, path.string() + ": missing column '" + name + "'");
    cols.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  const std::size_t n = records.size() - 1;
  fa::Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
  std::vector<std::string> ids(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = records[r + 1];
    fa::require(rec.size() == header.size(), fa::ErrorCode::kParse,
                path.string() + ": row " + std::to_string(r + 1) + " has the wrong number of fields");
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const std::string& cell = rec[cols[j]];
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      fa::require(res.ec == std::errc() && res.ptr == cell.data() + cell.size() && std::isfinite(v),
                  fa::ErrorCode::kParse, path.string() + ": row " + std::to_string(r + 1) + ": bad number '" + cell + "'");
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
    }
    ids[r] = std::to_string(r + 1);
  }
  return fa::Dataset(std::move(x), std::vector<int>(n, 0), std::vector<int>(n, 0), names, std::move(ids));
}

std::vector<std::string> model_feature_names(const fa::Predictor& model) {
  if (const auto* t = dynamic_cast<const fa::TrainedModel*>(&model)) return t->feature_names();
  if (const auto* m = dynamic_cast<const fa::MixtureModel*>(&model)) return m->members().front().feature_names();
  return {};
}

fa::DatasetSchema schema_for_data(const std::string& schema_path, const std::filesystem::path& data_path) {
  if (!schema_path.empty()) return fa::DatasetSchema::load(schema_path);
  auto guess = data_path;
  guess.replace_extension(".schema.json");
  fa::require(std::filesystem::exists(guess), fa::ErrorCode::kConfig,
              "no --schema given and " + guess.string() + " does not exist");
  return fa::DatasetSchema::load(guess);
}

int cmd_run(const std::string& config_path, const std::string& out, const std::optional<std::uint64_t>& seed,
            const std::string& models, bool no_mitigate, bool quiet) {
  auto cfg = fa::AuditConfig::load(config_path);
  if (seed) {
    cfg.seed = *seed;
    cfg.split_seed.reset();
  }
  if (!models.empty()) {
    cfg.models.clear();
    for (const auto& m : split_list(models)) {
      try {
        cfg.models.push_back(fa::parse_model_kind(m));
      } catch (const fa::Error& e) {
        fa::fail(fa::ErrorCode::kConfig, e.what());
      }
    }
  }
  if (no_mitigate) cfg.mitigate = false;
  if (!out.empty()) {
    cfg.output_dir = out;
    cfg.resolved_output_dir = out;
  }
  cfg.validate();

  const auto report = fa::run_audit(cfg, fa::audit_threads_from_env());
  fa::emit(report, cfg.resolved_output_dir);
  for (const auto& m : report.models) {
    if (m.succeeded) {
      if (!quiet) std::cout << fa::to_string(m.kind) << ": ok\n";
    } else {
      std::cerr << fa::to_string(m.kind) << ": failed at " << m.failed_stage << ": " << m.error << "\n";
    }
  }
  if (!quiet) std::cout << "report written to " << cfg.resolved_output_dir.string() << "\n";
  return report.all_succeeded() ? kExitOk : kExitPartial;
}

int cmd_explain(const std::string& model_path, const std::string& data_path, const std::string& estimator,
                const std::string& schema_path, const std::string& background_path, std::size_t background_size,
                std::uint64_t seed, std::size_t n_coalitions, unsigned threads, const std::string& out) {
  const auto model = load_model(model_path);
  const auto est = fa::parse_estimator(estimator);
  fa::Dataset data;
  if (!schema_path.empty()) {
    data = fa::load_dataset(data_path, fa::DatasetSchema::load(schema_path));
  } else {
    auto names = model_feature_names(*model);
    fa::require(!names.empty(), fa::ErrorCode::kConfig, "model has no feature names; pass --schema");
    data = load_features(data_path, names);
  }
  const fa::Dataset bg_source = background_path.empty() ? data : load_features(background_path, data.feature_names());
  const auto bg = fa::Background::sample(bg_source, background_size, seed);
  fa::ExplainParams params;
  params.seed = seed;
  params.n_coalitions = n_coalitions;
  params.threads = threads;
  const auto matrix = fa::explain_testset(*model, data, bg, est, params);
  matrix.write(out);
  std::cout << "wrote " << matrix.rows() << " explanations to " << out << "\n";
  return kExitOk;
}

int cmd_compare(const std::string& pre_path, const std::string& post_path, const std::string& data_path,
                const std::string& schema_path, const std::string& out) {
  const auto pre = fa::ShapMatrix::read(pre_path);
  const auto post = fa::ShapMatrix::read(post_path);
  const auto schema = schema_for_data(schema_path, data_path);
  fa::Dataset data = fa::load_dataset(data_path, schema);
  fa::require(data.rows() == pre.rows(), fa::ErrorCode::kShape,
              "data has " + std::to_string(data.rows()) + " rows, SHAP file has " + std::to_string(pre.rows()));
  if (data.row_ids() != pre.row_ids) {
    // Files written separately number rows differently; align by position.
    data = fa::Dataset(data.x(), data.y(), data.a(), data.feature_names(), pre.row_ids);
  }
  const auto comparisons = fa::compare_rankings(pre, post, data);
  std::ostringstream text;
  fa::csv::write_record(text, {"group", "rho", "p_value", "flag"});
  for (const auto& c : comparisons) {
    fa::csv::write_record(text, {fa::to_string(c.group), fa::csv::format_double(c.rho),
                                 fa::csv::format_double(c.p_value), fa::to_string(c.flag)});
  }
  if (out.empty()) {
    std::cout << text.str();
  } else {
    std::ofstream f(out, std::ios::binary);
    fa::require(static_cast<bool>(f), fa::ErrorCode::kIo, "cannot write " + out);
    f << text.str();
  }
  return kExitOk;
}

int cmd_synth(std::size_t n, std::size_t d, double bias, std::uint64_t seed, const std::string& out) {
  const auto data = fa::synth_biased(n, d, bias, seed);
  const auto schema = fa::synthetic_schema(data);
  fa::save_dataset(data, out, schema);
  auto schema_path = std::filesystem::path(out);
  schema_path.replace_extension(".schema.json");
  std::ofstream s(schema_path, std::ios::binary);
  fa::require(static_cast<bool>(s), fa::ErrorCode::kIo, "cannot write " + schema_path.string());
  s << schema.to_json().dump(2) << "\n";
  std::cout << "wrote " << out << " and " << schema_path.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness and explainability audit toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fa::kToolkitVersion));

  auto* run = app.add_subcommand("run", "Train, mitigate, explain and compare every configured model kind");
  std::string config_path, out_dir, models;
  std::optional<std::uint64_t> seed;
  bool no_mitigate = false, quiet = false;
  run->add_option("--config", config_path, "Audit config JSON")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--seed", seed, "Master seed (overrides the config)");
  run->add_option("--models", models, "Comma-separated subset of logistic,forest,boosted,neural");
  run->add_flag("--no-mitigate", no_mitigate, "Skip mitigation and ranking comparison");
  run->add_flag("--quiet", quiet, "Only report failures");

  auto* explain = app.add_subcommand("explain", "SHAP values of a saved model on a CSV");
  std::string model_path, data_path, estimator, schema_path, background_path, shap_out = "shap.csv";
  std::size_t background_size = 100, n_coalitions = 2048;
  std::uint64_t explain_seed = 0;
  unsigned threads = 1;
  explain->add_option("--model", model_path, "Saved model or mixture JSON")->required();
  explain->add_option("--data", data_path, "CSV with the model's feature columns")->required();
  explain->add_option("--estimator", estimator, "exact, kernel or tree")
      ->required()
      ->check(CLI::IsMember({"exact", "kernel", "tree"}));
  explain->add_option("--schema", schema_path, "Dataset schema JSON (default: use the model's feature names)");
  explain->add_option("--background", background_path, "CSV to sample background rows from (default: --data)");
  explain->add_option("--background-size", background_size, "Background rows")->check(CLI::PositiveNumber);
  explain->add_option("--seed", explain_seed, "Sampling seed");
  explain->add_option("--n-coalitions", n_coalitions, "Kernel estimator coalition budget");
  explain->add_option("--threads", threads, "Row-level worker threads")->check(CLI::PositiveNumber);
  explain->add_option("--out", shap_out, "Output SHAP CSV (a .json sidecar is written next to it)");

  auto* compare = app.add_subcommand("compare", "Spearman comparison of two SHAP files per group");
  std::string pre_path, post_path, compare_data, compare_schema, compare_out;
  compare->add_option("--pre", pre_path, "Baseline SHAP CSV")->required();
  compare->add_option("--post", post_path, "Mitigated SHAP CSV")->required();
  compare->add_option("--data", compare_data, "Dataset CSV holding the explained rows in order")->required();
  compare->add_option("--schema", compare_schema, "Dataset schema JSON (default: <data>.schema.json)");
  compare->add_option("--out", compare_out, "Write the comparison CSV here instead of stdout");

  auto* synth = app.add_subcommand("synth", "Write the synthetic biased fixture as CSV plus schema");
  std::size_t synth_n = 2000, synth_d = 8;
  double synth_bias = 1.0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--n", synth_n, "Rows");
  synth->add_option("--d", synth_d, "Features");
  synth->add_option("--bias", synth_bias, "Bias strength in [0, 1]");
  synth->add_option("--seed", synth_seed, "Seed");
  synth->add_option("--out", synth_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitFailure;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed, models, no_mitigate, quiet);
    if (explain->parsed()) {
      return cmd_explain(model_path, data_path, estimator, schema_path, background_path, background_size,
                         explain_seed, n_coalitions, threads, shap_out);
    }
    if (compare->parsed()) return cmd_compare(pre_path, post_path, compare_data, compare_schema, compare_out);
    if (synth->parsed()) return cmd_synth(synth_n, synth_d, synth_bias, synth_seed, synth_out);
  } catch (const fa::Error& e) {
    std::cerr << "error [" << fa::error_code_name(e.code()) << "]: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
