#include "fairaudit/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "fairaudit/csv.hpp"

namespace fairaudit {

namespace {

template <typename T>
T config_value(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), ErrorCode::kConfig, where + " must be a JSON object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
    require(known, ErrorCode::kConfig, "unknown key '" + item.key() + "' in " + where);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

nlohmann::json importance_json(const std::vector<GlobalImportance>& imps) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& g : imps) out[to_string(g.group)] = {{"rows", g.rows}, {"importance", g.importance}};
  return out;
}

nlohmann::json variant_json(const VariantResult& v, Estimator estimator) {
  return {{"predictive", v.predictive.to_json()},
          {"fairness", v.fairness.to_json()},
          {"metrics", metrics_json(v.predictive, v.fairness)},
          {"estimator", to_string(estimator)},
          {"importance", importance_json(v.importance)}};
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::string optional_cell(const std::optional<double>& v) { return v ? csv::format_double(*v) : ""; }

VariantResult evaluate(const Predictor& model, const Dataset& test) {
  VariantResult v;
  const auto probas = model.predict_proba(test.x());
  v.predictive = predictive_metrics(probas, test.y());
  const auto labels = threshold_labels(probas);
  v.fairness = fairness_metrics(labels, test.y(), test.a());
  return v;
}

void explain_variant(VariantResult& v, const Predictor& model, const Dataset& test, const Background& bg,
                     Estimator estimator, const ExplainParams& params) {
  v.shap = explain_testset(model, test, bg, estimator, params);
  for (GroupFilter g : kAllGroups) v.importance.push_back(global_importance(*v.shap, test, g));
}

ModelAudit audit_kind(const AuditConfig& cfg, ModelKind kind, const Split& sp, const Background& bg) {
  ModelAudit m;
  m.kind = kind;
  std::string stage = "configure";
  try {
    const ModelSpec spec = cfg.spec_for(kind);
    ExplainParams params;
    params.n_coalitions = cfg.explain.n_coalitions;
    params.seed = derive_seed(cfg.seed, 200 + static_cast<std::uint64_t>(kind));
    params.threads = cfg.explain.threads;

    stage = "train";
    m.baseline_model = train(spec, sp.train);
    stage = "evaluate";
    m.baseline = evaluate(*m.baseline_model, sp.test);

    if (cfg.mitigate) {
      stage = "mitigate";
      m.mitigated_model = exponentiated_gradient(spec, sp.train, cfg.eg);
      stage = "evaluate_mitigated";
      m.mitigated = evaluate(*m.mitigated_model, sp.test);
      for (const auto& name : metric_names()) {
        const auto b = metric_value(m.baseline->predictive, m.baseline->fairness, name);
        const auto a = metric_value(m.mitigated->predictive, m.mitigated->fairness, name);
        m.deltas.push_back({name, b, a, delta_tag(name, b, a)});
      }
    }

    stage = "explain";
    const auto override_it = cfg.explain.overrides.find(kind);
    m.baseline_estimator =
        override_it != cfg.explain.overrides.end() ? override_it->second : default_estimator(*m.baseline_model);
    explain_variant(*m.baseline, *m.baseline_model, sp.test, bg, m.baseline_estimator, params);
    if (cfg.mitigate) {
      stage = "explain_mitigated";
      m.mitigated_estimator = cfg.explain.mixture_estimator;
      explain_variant(*m.mitigated, *m.mitigated_model, sp.test, bg, m.mitigated_estimator, params);
      stage = "compare";
      m.rank_comparisons = compare_rankings(*m.baseline->shap, *m.mitigated->shap, sp.test);
    }
    m.succeeded = true;
  } catch (const Error& e) {
    m.failed_stage = stage;
    m.error = e.what();
    m.error_code = std::string(error_code_name(e.code()));
  } catch (const std::exception& e) {
    m.failed_stage = stage;
    m.error = e.what();
    m.error_code = "internal";
  }
  return m;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  out.flush();
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

std::string records_text(const std::vector<csv::Record>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) csv::write_record(out, r);
  return out.str();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

}  // namespace

void AuditConfig::validate() const {
  require(!models.empty(), ErrorCode::kConfig, "config must request at least one model kind");
  std::set<ModelKind> seen(models.begin(), models.end());
  require(seen.size() == models.size(), ErrorCode::kConfig, "model kinds must not repeat");
  require(train_fraction > 0 && train_fraction < 1, ErrorCode::kConfig, "train_fraction must lie in (0, 1)");
  require(explain.background_size >= 1, ErrorCode::kConfig, "background_size must be at least 1");
  require(explain.n_coalitions >= 2, ErrorCode::kConfig, "n_coalitions must be at least 2");
  require(explain.threads >= 1, ErrorCode::kConfig, "explain threads must be at least 1");
  require(!output_dir.empty(), ErrorCode::kConfig, "output_dir must not be empty");
  if (dataset.synthetic) {
    require(dataset.synth_n >= 40 && dataset.synth_d >= 2 && dataset.synth_bias >= 0 && dataset.synth_bias <= 1,
            ErrorCode::kConfig, "synthetic dataset needs n >= 40, d >= 2 and bias_strength in [0, 1]");
  } else {
    require(!dataset.path.empty(), ErrorCode::kConfig, "dataset path missing");
    try {
      dataset.schema.validate();
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, std::string("dataset schema: ") + e.what());
    }
  }
  eg.validate();
  for (ModelKind k : models) {
    try {
      spec_for(k).validate();
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, std::string(to_string(k)) + " hyperparameters: " + e.what());
    }
  }
}

ModelSpec AuditConfig::spec_for(ModelKind kind) const {
  const auto it = hyperparameters.find(kind);
  const nlohmann::json hp = it == hyperparameters.end() ? nlohmann::json::object() : it->second;
  ModelSpec spec = ModelSpec::from_json({{"kind", std::string(to_string(kind))}, {"hyperparameters", hp}});
  if (!hp.contains("seed")) spec = spec.with_seed(derive_seed(seed, static_cast<std::uint64_t>(kind)));
  return spec;
}

nlohmann::json AuditConfig::to_json() const {
  nlohmann::json ds;
  if (dataset.synthetic) {
    ds = {{"synthetic",
           {{"n", dataset.synth_n}, {"d", dataset.synth_d}, {"bias_strength", dataset.synth_bias},
            {"seed", dataset.synth_seed}}}};
  } else {
    ds = {{"path", dataset.path}, {"schema", dataset.schema.to_json()}};
  }
  nlohmann::json split = {{"train_fraction", train_fraction}};
  if (split_seed) split["seed"] = *split_seed;
  nlohmann::json kinds = nlohmann::json::array();
  for (ModelKind k : models) kinds.push_back(std::string(to_string(k)));
  nlohmann::json hp = nlohmann::json::object();
  for (const auto& [k, v] : hyperparameters) hp[std::string(to_string(k))] = v;
  nlohmann::json mitigation = eg.to_json();
  mitigation["enabled"] = mitigate;
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [k, e] : explain.overrides) overrides[std::string(to_string(k))] = to_string(e);
  return {{"name", name},
          {"dataset", ds},
          {"split", split},
          {"seed", seed},
          {"models", kinds},
          {"hyperparameters", hp},
          {"mitigation", mitigation},
          {"explain",
           {{"background_size", explain.background_size},
            {"n_coalitions", explain.n_coalitions},
            {"estimators", overrides},
            {"mixture_estimator", to_string(explain.mixture_estimator)},
            {"threads", explain.threads}}},
          {"output_dir", output_dir}};
}

AuditConfig AuditConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j, {"name", "dataset", "split", "seed", "models", "hyperparameters", "mitigation", "explain",
                     "output_dir"},
                 "config");
  AuditConfig c;
  c.seed = config_value<std::uint64_t>(j, "seed", 0);

  require(j.contains("dataset"), ErrorCode::kConfig, "config needs a dataset block");
  const auto& ds = j.at("dataset");
  reject_unknown(ds, {"path", "schema", "schema_path", "synthetic"}, "dataset");
  if (ds.contains("synthetic")) {
    const auto& s = ds.at("synthetic");
    reject_unknown(s, {"n", "d", "bias_strength", "seed"}, "dataset.synthetic");
    c.dataset.synthetic = true;
    c.dataset.synth_n = config_value<std::size_t>(s, "n", c.dataset.synth_n);
    c.dataset.synth_d = config_value<std::size_t>(s, "d", c.dataset.synth_d);
    c.dataset.synth_bias = config_value<double>(s, "bias_strength", c.dataset.synth_bias);
    c.dataset.synth_seed = config_value<std::uint64_t>(s, "seed", c.seed);
  } else {
    c.dataset.path = config_value<std::string>(ds, "path", "");
    require(!c.dataset.path.empty(), ErrorCode::kConfig, "dataset needs a path or a synthetic block");
    c.dataset.resolved_path = resolve(base_dir, c.dataset.path);
    try {
      if (ds.contains("schema")) {
        c.dataset.schema = DatasetSchema::from_json(ds.at("schema"));
      } else {
        require(ds.contains("schema_path"), ErrorCode::kConfig, "dataset needs schema or schema_path");
        c.dataset.schema = DatasetSchema::load(resolve(base_dir, ds.at("schema_path").get<std::string>()));
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kIo) throw;
      fail(ErrorCode::kConfig, std::string("dataset schema: ") + e.what());
    }
  }
  c.name = config_value<std::string>(
      j, "name", c.dataset.synthetic ? std::string("synth_biased") : std::filesystem::path(c.dataset.path).stem().string());

  if (j.contains("split")) {
    const auto& s = j.at("split");
    reject_unknown(s, {"train_fraction", "seed"}, "split");
    c.train_fraction = config_value<double>(s, "train_fraction", c.train_fraction);
    if (s.contains("seed")) c.split_seed = config_value<std::uint64_t>(s, "seed", 0);
  }

  require(j.contains("models"), ErrorCode::kConfig, "config needs a models list");
  try {
    for (const auto& k : j.at("models")) c.models.push_back(parse_model_kind(k.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("models: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }

  if (j.contains("hyperparameters")) {
    for (const auto& item : j.at("hyperparameters").items()) {
      ModelKind k;
      try {
        k = parse_model_kind(item.key());
      } catch (const Error& e) {
        fail(ErrorCode::kConfig, std::string("hyperparameters: ") + e.what());
      }
      require(item.value().is_object(), ErrorCode::kConfig, "hyperparameters for " + item.key() + " must be an object");
      c.hyperparameters[k] = item.value();
    }
  }

  if (j.contains("mitigation")) {
    nlohmann::json m = j.at("mitigation");
    reject_unknown(m, {"enabled", "eps", "max_iters", "eta", "bound", "nu"}, "mitigation");
    c.mitigate = config_value<bool>(m, "enabled", true);
    m.erase("enabled");
    c.eg = EgConfig::from_json(m);
  }

  if (j.contains("explain")) {
    const auto& e = j.at("explain");
    reject_unknown(e, {"background_size", "n_coalitions", "estimators", "mixture_estimator", "threads"}, "explain");
    c.explain.background_size = config_value<std::size_t>(e, "background_size", c.explain.background_size);
    c.explain.n_coalitions = config_value<std::size_t>(e, "n_coalitions", c.explain.n_coalitions);
    c.explain.threads = config_value<unsigned>(e, "threads", c.explain.threads);
    c.explain.mixture_estimator =
        parse_estimator(config_value<std::string>(e, "mixture_estimator", to_string(c.explain.mixture_estimator)));
    if (e.contains("estimators")) {
      for (const auto& item : e.at("estimators").items()) {
        try {
          c.explain.overrides[parse_model_kind(item.key())] = parse_estimator(item.value().get<std::string>());
        } catch (const nlohmann::json::exception& ex) {
          fail(ErrorCode::kConfig, std::string("explain.estimators: ") + ex.what());
        } catch (const Error& ex) {
          fail(ErrorCode::kConfig, std::string("explain.estimators: ") + ex.what());
        }
      }
    }
  }

  c.output_dir = config_value<std::string>(j, "output_dir", c.output_dir);
  c.resolved_output_dir = resolve(base_dir, c.output_dir);
  c.validate();
  return c;
}

AuditConfig AuditConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::string AuditConfig::hash() const { return hex64(fnv1a(to_json().dump())); }

std::string delta_tag(const std::string& metric, std::optional<double> baseline, std::optional<double> mitigated) {
  if (!baseline || !mitigated) return "undefined";
  constexpr double kBand = 1e-12;
  double b = *baseline, m = *mitigated;
  if (!higher_is_better(metric)) {
    // Smaller magnitude is better: flip to a higher-is-better score.
    b = -std::abs(b);
    m = -std::abs(m);
  }
  if (m > b + kBand) return "improve";
  if (m < b - kBand) return "decline";
  return "unchanged";
}

bool AuditReport::all_succeeded() const {
  return std::all_of(models.begin(), models.end(), [](const ModelAudit& m) { return m.succeeded; });
}

bool AuditReport::any_failed() const { return !all_succeeded(); }

nlohmann::json AuditReport::to_json() const {
  nlohmann::json kinds = nlohmann::json::array();
  for (const auto& m : models) {
    nlohmann::json k = {{"kind", std::string(to_string(m.kind))},
                        {"status", m.succeeded ? "succeeded" : "failed"},
                        {"spec", config.spec_for(m.kind).to_json()}};
    if (!m.succeeded) {
      k["failed_stage"] = m.failed_stage;
      k["error"] = m.error;
      k["error_code"] = m.error_code;
    }
    if (m.baseline) k["baseline"] = variant_json(*m.baseline, m.baseline_estimator);
    if (m.mitigated) {
      auto v = variant_json(*m.mitigated, m.mitigated_estimator);
      const auto& mix = *m.mitigated_model;
      v["mitigation"] = {{"final_gap", mix.final_gap},
                         {"early_stopped", mix.early_stopped},
                         {"selection", mix.selection},
                         {"iterations", mix.history.size()},
                         {"members", mix.members().size()},
                         {"member_weights", mix.weights()}};
      k["mitigated"] = v;
    }
    nlohmann::json deltas = nlohmann::json::array();
    for (const auto& d : m.deltas) {
      deltas.push_back({{"metric", d.metric},
                        {"baseline", optional_json(d.baseline)},
                        {"mitigated", optional_json(d.mitigated)},
                        {"tag", d.tag}});
    }
    k["deltas"] = deltas;
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : m.rank_comparisons) comps.push_back(c.to_json());
    k["rank_comparisons"] = comps;
    kinds.push_back(k);
  }
  return {{"format", "fairaudit-report"},
          {"version", 1},
          {"toolkit_version", std::string(kToolkitVersion)},
          {"config_hash", config.hash()},
          {"config", config.to_json()},
          {"dataset",
           {{"name", dataset_name},
            {"train_rows", train_rows},
            {"test_rows", test_rows},
            {"features", feature_names},
            {"split_seed", config.effective_split_seed()},
            {"background_rows", std::min(config.explain.background_size, train_rows)},
            {"background_fingerprint", background_fingerprint}}},
          {"warnings", warnings},
          {"status", all_succeeded() ? "complete" : "partial"},
          {"models", kinds}};
}

Dataset load_source(const AuditConfig& cfg) {
  if (cfg.dataset.synthetic) {
    return synth_biased(cfg.dataset.synth_n, cfg.dataset.synth_d, cfg.dataset.synth_bias, cfg.dataset.synth_seed);
  }
  return load_dataset(cfg.dataset.resolved_path, cfg.dataset.schema);
}

DatasetSchema synthetic_schema(const Dataset& data) {
  DatasetSchema s;
  s.feature_columns = data.feature_names();
  s.label_column = "label";
  s.protected_column = "race";
  s.protected_positive_values = {"Black"};
  s.protected_negative_values = {"non-Black"};
  return s;
}

unsigned audit_threads_from_env() {
  const char* raw = std::getenv("AUDIT_THREADS");
  if (!raw) return 1;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || v < 1) return 1;
  return static_cast<unsigned>(std::min<long>(v, 64));
}

AuditReport run_audit(const AuditConfig& cfg, unsigned max_threads) {
  cfg.validate();
  const Dataset data = load_source(cfg);
  const Split sp = split(data, cfg.train_fraction, cfg.effective_split_seed());
  const Background bg = Background::sample(sp.train, cfg.explain.background_size, derive_seed(cfg.seed, 101));

  AuditReport report;
  report.config = cfg;
  report.dataset_name = cfg.name;
  report.train_rows = sp.train.rows();
  report.test_rows = sp.test.rows();
  report.feature_names = data.feature_names();
  report.background_fingerprint = bg.fingerprint();
  report.warnings = sp.warnings;
  report.test = sp.test;
  report.test_schema = cfg.dataset.synthetic ? synthetic_schema(data) : cfg.dataset.schema;
  report.models.resize(cfg.models.size());

  const unsigned threads =
      std::max(1U, std::min<unsigned>(max_threads == 0 ? audit_threads_from_env() : max_threads,
                                      static_cast<unsigned>(cfg.models.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.models.size(); i = next++) {
      report.models[i] = audit_kind(cfg, cfg.models[i], sp, bg);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return report;
}

void emit(const AuditReport& report, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path target = fs::absolute(out_dir, ec);
  require(!ec, ErrorCode::kIo, "bad output path " + out_dir.string());
  if (fs::exists(target)) {
    require(fs::is_directory(target), ErrorCode::kIo, target.string() + " exists and is not a directory");
    const bool empty = fs::is_empty(target);
    require(empty || fs::exists(target / "report.json"), ErrorCode::kIo,
            target.string() + " exists and does not hold a previous report; refusing to replace it");
  }
  const fs::path parent = target.parent_path();
  fs::create_directories(parent, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + parent.string() + ": " + ec.message());
  const std::string stem = "." + target.filename().string();
  const fs::path staging = parent / (stem + ".tmp-" + report.config.hash());
  fs::remove_all(staging, ec);
  fs::create_directory(staging, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + staging.string() + ": " + ec.message());

  try {
    const std::string& ds = report.dataset_name;
    write_text(staging / "report.json", report.to_json().dump(2) + "\n");

    std::vector<csv::Record> metrics = {{"model", "dataset", "metric", "baseline", "mitigated", "delta", "tag"}};
    std::vector<csv::Record> ranks = {{"model", "dataset", "group", "rho", "p_value", "flag"}};
    std::vector<csv::Record> eod = {{"model", "dataset", "variant", "eod"}};
    std::vector<csv::Record> imps = {{"model", "dataset", "variant", "group", "feature", "mean_abs_shap"}};
    fs::create_directory(staging / "shap");
    fs::create_directory(staging / "models");
    if (report.config.mitigate) fs::create_directory(staging / "traces");

    for (const auto& m : report.models) {
      const std::string kind(to_string(m.kind));
      if (m.baseline) {
        for (const auto& name : metric_names()) {
          const auto b = metric_value(m.baseline->predictive, m.baseline->fairness, name);
          csv::Record r = {kind, ds, name, optional_cell(b), "", "", "n/a"};
          const auto found = std::find_if(m.deltas.begin(), m.deltas.end(),
                                          [&](const MetricDelta& d) { return d.metric == name; });
          if (found != m.deltas.end()) {
            r[4] = optional_cell(found->mitigated);
            if (found->baseline && found->mitigated) r[5] = csv::format_double(*found->mitigated - *found->baseline);
            r[6] = found->tag;
          }
          metrics.push_back(r);
        }
      }
      for (const auto& c : m.rank_comparisons) {
        ranks.push_back({kind, ds, to_string(c.group), csv::format_double(c.rho), csv::format_double(c.p_value),
                         to_string(c.flag)});
      }
      eod.push_back({kind, ds, "baseline", m.baseline ? csv::format_double(m.baseline->fairness.eod) : ""});
      eod.push_back({kind, ds, "mitigated", m.mitigated ? csv::format_double(m.mitigated->fairness.eod) : ""});

      auto variant_files = [&](const std::optional<VariantResult>& v, const std::string& variant) {
        if (!v) return;
        for (const auto& g : v->importance) {
          for (std::size_t j = 0; j < g.importance.size(); ++j) {
            imps.push_back({kind, ds, variant, to_string(g.group), g.feature_names[j],
                            csv::format_double(g.importance[j])});
          }
        }
        if (v->shap) v->shap->write(staging / "shap" / (kind + "_" + variant + ".csv"));
      };
      variant_files(m.baseline, "baseline");
      variant_files(m.mitigated, "mitigated");
      if (m.baseline_model) write_text(staging / "models" / (kind + "_baseline.json"), m.baseline_model->to_json().dump() + "\n");
      if (m.mitigated_model) {
        write_text(staging / "models" / (kind + "_mitigated.json"), m.mitigated_model->to_json().dump() + "\n");
        write_trace(*m.mitigated_model, staging / "traces" / (kind + "_eg.jsonl"));
      }
    }
    write_text(staging / "metrics.csv", records_text(metrics));
    write_text(staging / "rank_stability.csv", records_text(ranks));
    write_text(staging / "eod.csv", records_text(eod));
    write_text(staging / "importances.csv", records_text(imps));
    write_text(staging / "summary.md", render_summary(report));
    if (report.test.rows() > 0) {
      save_dataset(report.test, staging / "test.csv", report.test_schema);
      write_text(staging / "test.schema.json", report.test_schema.to_json().dump(2) + "\n");
    }
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }

  const fs::path previous = parent / (stem + ".old-" + report.config.hash());
  fs::remove_all(previous, ec);
  if (fs::exists(target)) {
    fs::rename(target, previous, ec);
    if (ec) {
      fs::remove_all(staging, ec);
      fail(ErrorCode::kIo, "cannot replace " + target.string());
    }
  }
  fs::rename(staging, target, ec);
  if (ec) {
    const std::string msg = ec.message();
    if (fs::exists(previous)) fs::rename(previous, target, ec);
    fs::remove_all(staging, ec);
    fail(ErrorCode::kIo, "cannot move report into " + target.string() + ": " + msg);
  }
  fs::remove_all(previous, ec);
}

std::string render_summary(const AuditReport& report) {
  std::ostringstream out;
  out << "# Audit summary: " << report.dataset_name << "\n\n";
  out << "Config hash `" << report.config.hash() << "`, toolkit " << kToolkitVersion << ". Train rows "
      << report.train_rows << ", test rows " << report.test_rows << ", " << report.feature_names.size()
      << " features.\n\n";
  for (const auto& w : report.warnings) out << "Warning: " << w << "\n\n";

  out << "## Predictive and fairness metrics (test split)\n\n";
  out << "| model | metric | baseline | mitigated | change |\n|---|---|---|---|---|\n";
  for (const auto& m : report.models) {
    if (!m.baseline) continue;
    for (const auto& name : metric_names()) {
      const auto b = metric_value(m.baseline->predictive, m.baseline->fairness, name);
      std::string mitigated = "", tag = "";
      for (const auto& d : m.deltas) {
        if (d.metric != name) continue;
        mitigated = d.mitigated ? fixed(*d.mitigated) : "undefined";
        tag = d.tag;
      }
      out << "| " << to_string(m.kind) << " | " << name << " | " << (b ? fixed(*b) : "undefined") << " | "
          << mitigated << " | " << tag << " |\n";
    }
  }

  bool any_rank = false;
  for (const auto& m : report.models) any_rank = any_rank || !m.rank_comparisons.empty();
  if (any_rank) {
    out << "\n## Ranking stability (Spearman rho, baseline vs mitigated)\n\n";
    out << "| model | group | rho | p | flag |\n|---|---|---|---|---|\n";
    for (const auto& m : report.models) {
      for (const auto& c : m.rank_comparisons) {
        std::ostringstream p;
        p.precision(3);
        p << c.p_value;
        out << "| " << to_string(m.kind) << " | " << to_string(c.group) << " | " << fixed(c.rho, 3) << " | "
            << p.str() << " | " << to_string(c.flag) << " |\n";
      }
    }
    out << "\nFlags: dag means p > 0.01, ddag means 0.001 < p <= 0.01 (no rejection at that level).\n";
  }

  std::vector<const ModelAudit*> failed;
  for (const auto& m : report.models) {
    if (!m.succeeded) failed.push_back(&m);
  }
  if (!failed.empty()) {
    out << "\n## Failed model kinds\n\n";
    for (const auto* m : failed) {
      out << "- " << to_string(m->kind) << " (stage " << m->failed_stage << ", " << m->error_code << "): " << m->error
          << "\n";
    }
  }
  return out.str();
}

}  // namespace fairaudit
