#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fairaudit/report.hpp"

namespace py = pybind11;
namespace fa = fairaudit;

namespace {

fa::ModelSpec make_spec(const std::string& kind, const std::string& hyperparameters) {
  return fa::ModelSpec::from_json({{"kind", kind}, {"hyperparameters", nlohmann::json::parse(hyperparameters)}});
}

fa::MomentArray to_moments(const std::vector<double>& v) {
  fa::require(v.size() == fa::kMomentCount, fa::ErrorCode::kShape, "expected 8 dual weights");
  fa::MomentArray m{};
  std::copy(v.begin(), v.end(), m.begin());
  return m;
}

py::dict explanation_dict(const fa::ShapExplanation& e) {
  py::dict d;
  d["phi"] = e.phi;
  d["base_value"] = e.base_value;
  d["fx"] = e.fx;
  return d;
}

py::dict comparison_dict(const fa::RankComparison& c) {
  py::dict d;
  d["group"] = fa::to_string(c.group);
  d["rho"] = c.rho;
  d["p_value"] = c.p_value;
  d["flag"] = fa::to_string(c.flag);
  d["n_features"] = c.n_features;
  d["pre_ranks"] = c.pre.ranks;
  d["post_ranks"] = c.post.ranks;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the fairaudit toolkit";
  m.attr("__version__") = std::string(fa::kToolkitVersion);

  static py::exception<fa::Error> error(m, "FairauditError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const fa::Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("code") = std::string(fa::error_code_name(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<fa::Dataset>(m, "Dataset")
      .def(py::init<fa::Matrix, std::vector<int>, std::vector<int>, std::vector<std::string>,
                    std::vector<std::string>>(),
           py::arg("x"), py::arg("y"), py::arg("a"), py::arg("feature_names"), py::arg("row_ids"))
      .def_property_readonly("x", &fa::Dataset::x)
      .def_property_readonly("y", &fa::Dataset::y)
      .def_property_readonly("a", &fa::Dataset::a)
      .def_property_readonly("feature_names", &fa::Dataset::feature_names)
      .def_property_readonly("row_ids", &fa::Dataset::row_ids)
      .def_property_readonly("rows", &fa::Dataset::rows)
      .def("__len__", &fa::Dataset::rows);

  m.def(
      "load_dataset",
      [](const std::filesystem::path& path, const std::filesystem::path& schema) {
        return fa::load_dataset(path, fa::DatasetSchema::load(schema));
      },
      py::arg("path"), py::arg("schema_path"));
  m.def("synth_biased", &fa::synth_biased, py::arg("n"), py::arg("d"), py::arg("bias_strength"), py::arg("seed"));
  m.def(
      "split",
      [](const fa::Dataset& d, double fraction, std::uint64_t seed) {
        auto s = fa::split(d, fraction, seed);
        return py::make_tuple(s.train, s.test);
      },
      py::arg("dataset"), py::arg("train_fraction"), py::arg("seed"));

  py::class_<fa::Predictor>(m, "Predictor")
      .def("predict_proba", py::overload_cast<const fa::Matrix&>(&fa::Predictor::predict_proba, py::const_),
           py::arg("x"))
      .def("predict_labels", &fa::Predictor::predict_labels, py::arg("x"))
      .def_property_readonly("feature_count", &fa::Predictor::feature_count);

  py::class_<fa::TrainedModel, fa::Predictor>(m, "TrainedModel")
      .def_property_readonly("kind", [](const fa::TrainedModel& t) { return std::string(fa::to_string(t.kind())); })
      .def("to_json", [](const fa::TrainedModel& t) { return t.to_json().dump(); })
      .def_static("from_json", [](const std::string& s) { return fa::TrainedModel::from_json(nlohmann::json::parse(s)); });

  py::class_<fa::MixtureModel, fa::Predictor>(m, "MixtureModel")
      .def_property_readonly("members", &fa::MixtureModel::members)
      .def_property_readonly("weights", &fa::MixtureModel::weights)
      .def_readonly("final_gap", &fa::MixtureModel::final_gap)
      .def_readonly("early_stopped", &fa::MixtureModel::early_stopped)
      .def_readonly("selection", &fa::MixtureModel::selection)
      .def_property_readonly("history",
                             [](const fa::MixtureModel& mix) {
                               py::list out;
                               for (const auto& it : mix.history) {
                                 py::dict d;
                                 d["iteration"] = it.iteration;
                                 d["lambda"] = std::vector<double>(it.lambda.begin(), it.lambda.end());
                                 d["gamma"] = std::vector<double>(it.gamma.begin(), it.gamma.end());
                                 d["loss"] = it.loss;
                                 d["gap"] = it.gap;
                                 out.append(d);
                               }
                               return out;
                             })
      .def("to_json", [](const fa::MixtureModel& mix) { return mix.to_json().dump(); })
      .def_static("from_json", [](const std::string& s) { return fa::MixtureModel::from_json(nlohmann::json::parse(s)); })
      .def("write_trace", [](const fa::MixtureModel& mix, const std::filesystem::path& p) { fa::write_trace(mix, p); });

  m.def(
      "train",
      [](const std::string& kind, const fa::Dataset& data, const std::string& hyperparameters,
         std::optional<std::vector<double>> weights) {
        const auto spec = make_spec(kind, hyperparameters);
        if (weights) return fa::train(spec, data, fa::SampleWeights(*weights));
        return fa::train(spec, data);
      },
      py::arg("kind"), py::arg("data"), py::arg("hyperparameters") = "{}", py::arg("weights") = py::none());

  m.def(
      "exponentiated_gradient",
      [](const std::string& kind, const fa::Dataset& train, const std::string& hyperparameters, double eps,
         int max_iters, double eta, double bound, double nu) {
        fa::EgConfig cfg;
        cfg.eps = eps;
        cfg.max_iters = max_iters;
        cfg.eta = eta;
        cfg.bound = bound;
        cfg.nu = nu;
        return fa::exponentiated_gradient(make_spec(kind, hyperparameters), train, cfg);
      },
      py::arg("kind"), py::arg("train"), py::arg("hyperparameters") = "{}", py::arg("eps") = 0.01,
      py::arg("max_iters") = 50, py::arg("eta") = 2.0, py::arg("bound") = 100.0, py::arg("nu") = 1e-6);

  m.def(
      "replay_trace",
      [](const std::filesystem::path& p, const std::string& kind, const fa::Dataset& train,
         const std::string& hyperparameters) { return fa::replay_trace(p, make_spec(kind, hyperparameters), train); },
      py::arg("path"), py::arg("kind"), py::arg("train"), py::arg("hyperparameters") = "{}");

  m.def(
      "eod_moments",
      [](const std::vector<int>& predictions, const fa::Dataset& data) {
        const auto g = fa::eod_moments(predictions, data).gamma;
        return std::vector<double>(g.begin(), g.end());
      },
      py::arg("predictions"), py::arg("data"));

  m.def(
      "cost_sensitive_relabel",
      [](const std::vector<double>& lambda, const fa::Dataset& data) {
        const auto r = fa::cost_sensitive_relabel(to_moments(lambda), data);
        return py::make_tuple(r.labels, r.weights);
      },
      py::arg("lambda_"), py::arg("data"));

  py::class_<fa::Background>(m, "Background")
      .def(py::init<fa::Matrix>(), py::arg("rows"))
      .def_static("sample", &fa::Background::sample, py::arg("data"), py::arg("size"), py::arg("seed"))
      .def_property_readonly("rows", &fa::Background::rows)
      .def("fingerprint", &fa::Background::fingerprint);

  m.def(
      "exact_shap",
      [](const fa::Predictor& model, const std::vector<double>& x, const fa::Background& bg) {
        return explanation_dict(fa::exact_shap(model, x, bg));
      },
      py::arg("model"), py::arg("x"), py::arg("background"));
  m.def(
      "kernel_shap",
      [](const fa::Predictor& model, const std::vector<double>& x, const fa::Background& bg, std::size_t n, std::uint64_t seed) {
        return explanation_dict(fa::kernel_shap(model, x, bg, n, seed));
      },
      py::arg("model"), py::arg("x"), py::arg("background"), py::arg("n_coalitions") = 2048, py::arg("seed") = 0);
  m.def(
      "tree_shap",
      [](const fa::Predictor& model, const std::vector<double>& x, const fa::Background& bg) {
        return explanation_dict(fa::tree_shap(model, x, bg));
      },
      py::arg("model"), py::arg("x"), py::arg("background"));

  py::class_<fa::ShapMatrix>(m, "ShapMatrix")
      .def_property_readonly("estimator", [](const fa::ShapMatrix& s) { return fa::to_string(s.estimator); })
      .def_readonly("feature_names", &fa::ShapMatrix::feature_names)
      .def_readonly("row_ids", &fa::ShapMatrix::row_ids)
      .def_readonly("phi", &fa::ShapMatrix::phi)
      .def_readonly("base_values", &fa::ShapMatrix::base_values)
      .def_readonly("fx", &fa::ShapMatrix::fx)
      .def("write", &fa::ShapMatrix::write, py::arg("csv_path"))
      .def_static("read", &fa::ShapMatrix::read, py::arg("csv_path"))
      .def("__len__", &fa::ShapMatrix::rows);

  m.def(
      "explain_testset",
      [](const fa::Predictor& model, const fa::Dataset& test, const fa::Background& bg, const std::string& estimator,
         std::size_t n_coalitions, std::uint64_t seed, unsigned threads) {
        fa::ExplainParams p;
        p.n_coalitions = n_coalitions;
        p.seed = seed;
        p.threads = threads;
        py::gil_scoped_release release;
        return fa::explain_testset(model, test, bg, fa::parse_estimator(estimator), p);
      },
      py::arg("model"), py::arg("test"), py::arg("background"), py::arg("estimator"), py::arg("n_coalitions") = 2048,
      py::arg("seed") = 0, py::arg("threads") = 1);
  m.def(
      "global_importance",
      [](const fa::ShapMatrix& s, const fa::Dataset& test, const std::string& group) {
        return fa::global_importance(s, test, fa::parse_group_filter(group)).importance;
      },
      py::arg("matrix"), py::arg("test"), py::arg("group") = "overall");

  m.def(
      "predictive_metrics",
      [](const std::vector<double>& probas, const std::vector<int>& labels) {
        return fa::predictive_metrics(probas, labels).to_json().dump();
      },
      py::arg("probas"), py::arg("labels"));
  m.def(
      "eod_difference",
      [](const std::vector<int>& pred, const std::vector<int>& labels, const std::vector<int>& groups) {
        const auto e = fa::eod_difference(pred, labels, groups);
        return py::make_tuple(e.eod, e.tpr_component, e.fpr_component);
      },
      py::arg("predictions"), py::arg("labels"), py::arg("groups"));
  m.def(
      "dp_difference",
      [](const std::vector<int>& pred, const std::vector<int>& groups) { return fa::dp_difference(pred, groups); },
      py::arg("predictions"), py::arg("groups"));
  m.def(
      "pp_difference",
      [](const std::vector<int>& pred, const std::vector<int>& labels, const std::vector<int>& groups) {
        return fa::pp_difference(pred, labels, groups);
      },
      py::arg("predictions"), py::arg("labels"), py::arg("groups"));

  m.def(
      "rank_features",
      [](const std::vector<double>& importance) { return fa::descending_ranks(importance); }, py::arg("importance"));
  m.def(
      "spearman_rho",
      [](const std::vector<double>& a, const std::vector<double>& b) { return fa::spearman_rho(a, b); }, py::arg("a"),
      py::arg("b"));
  m.def("spearman_pvalue", &fa::spearman_pvalue, py::arg("rho"), py::arg("d"));
  m.def(
      "compare_rankings",
      [](const fa::ShapMatrix& pre, const fa::ShapMatrix& post, const fa::Dataset& test) {
        py::list out;
        for (const auto& c : fa::compare_rankings(pre, post, test)) out.append(comparison_dict(c));
        return out;
      },
      py::arg("pre"), py::arg("post"), py::arg("test"));

  m.def(
      "run_audit",
      [](const std::string& config_json, const std::filesystem::path& base_dir,
         std::optional<std::filesystem::path> out_dir) {
        const auto cfg = fa::AuditConfig::from_json(nlohmann::json::parse(config_json), base_dir);
        fa::AuditReport report;
        {
          py::gil_scoped_release release;
          report = fa::run_audit(cfg, 0);
          if (out_dir) fa::emit(report, *out_dir);
        }
        return report.to_json().dump();
      },
      py::arg("config_json"), py::arg("base_dir") = ".", py::arg("out_dir") = py::none());
}
