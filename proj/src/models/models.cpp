#include "fairaudit/models.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fairaudit/detail/learners.hpp"

namespace fairaudit {

namespace {

constexpr int kModelFormatVersion = 1;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

nlohmann::json vector_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kForest: return "forest";
    case ModelKind::kBoosted: return "boosted";
    case ModelKind::kNeural: return "neural";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::kLogistic, ModelKind::kForest, ModelKind::kBoosted, ModelKind::kNeural}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorCode::kConfig, "unknown model kind '" + std::string(name) + "'");
}

ModelSpec ModelSpec::defaults(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLogistic: return {LogisticParams{}};
    case ModelKind::kForest: return {ForestParams{}};
    case ModelKind::kBoosted: return {BoostedParams{}};
    case ModelKind::kNeural: return {NeuralParams{}};
  }
  fail(ErrorCode::kConfig, "unknown model kind");
}

ModelSpec ModelSpec::with_seed(std::uint64_t seed) const {
  ModelSpec copy = *this;
  std::visit(overloaded{[&](ForestParams& p) { p.seed = seed; },
                        [&](NeuralParams& p) { p.seed = seed; }, [](auto&) {}},
             copy.params);
  return copy;
}

void ModelSpec::validate() const {
  std::visit(
      overloaded{
          [](const LogisticParams& p) {
            require(p.l2 >= 0 && p.max_iterations >= 1 && p.tolerance > 0, ErrorCode::kConfig,
                    "logistic hyperparameters out of range");
          },
          [](const ForestParams& p) {
            require(p.n_trees >= 1 && p.max_depth >= 1 && p.min_samples_leaf >= 1 &&
                        p.max_features >= 0,
                    ErrorCode::kConfig, "forest hyperparameters out of range");
          },
          [](const BoostedParams& p) {
            require(p.n_rounds >= 0 && p.max_depth >= 1 && p.learning_rate > 0 &&
                        p.l2_leaf >= 0 && p.min_child_weight >= 0,
                    ErrorCode::kConfig, "boosted hyperparameters out of range");
          },
          [](const NeuralParams& p) {
            require(p.hidden_width >= 1 && p.epochs >= 1 && p.learning_rate > 0 && p.l2 >= 0,
                    ErrorCode::kConfig, "neural hyperparameters out of range");
          }},
      params);
}

nlohmann::json ModelSpec::to_json() const {
  nlohmann::json hp = std::visit(
      overloaded{
          [](const LogisticParams& p) -> nlohmann::json {
            return {{"l2", p.l2}, {"max_iterations", p.max_iterations}, {"tolerance", p.tolerance}};
          },
          [](const ForestParams& p) -> nlohmann::json {
            return {{"n_trees", p.n_trees},
                    {"max_depth", p.max_depth},
                    {"min_samples_leaf", p.min_samples_leaf},
                    {"seed", p.seed},
                    {"max_features", p.max_features}};
          },
          [](const BoostedParams& p) -> nlohmann::json {
            return {{"n_rounds", p.n_rounds},
                    {"max_depth", p.max_depth},
                    {"learning_rate", p.learning_rate},
                    {"l2_leaf", p.l2_leaf},
                    {"min_child_weight", p.min_child_weight}};
          },
          [](const NeuralParams& p) -> nlohmann::json {
            return {{"hidden_width", p.hidden_width},
                    {"epochs", p.epochs},
                    {"learning_rate", p.learning_rate},
                    {"seed", p.seed},
                    {"l2", p.l2}};
          }},
      params);
  return {{"kind", to_string(kind())}, {"hyperparameters", hp}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec spec = defaults(parse_model_kind(j.at("kind").get<std::string>()));
  const auto hp = j.value("hyperparameters", nlohmann::json::object());
  require(hp.is_object(), ErrorCode::kConfig, "hyperparameters must be an object");
  const auto known = spec.to_json().at("hyperparameters");
  for (const auto& [key, _] : hp.items()) {
    require(known.contains(key), ErrorCode::kConfig,
            "unknown " + std::string(to_string(spec.kind())) + " hyperparameter '" + key + "'");
  }
  try {
    std::visit(overloaded{
                   [&](LogisticParams& p) {
                     p.l2 = hp.value("l2", p.l2);
                     p.max_iterations = hp.value("max_iterations", p.max_iterations);
                     p.tolerance = hp.value("tolerance", p.tolerance);
                   },
                   [&](ForestParams& p) {
                     p.n_trees = hp.value("n_trees", p.n_trees);
                     p.max_depth = hp.value("max_depth", p.max_depth);
                     p.min_samples_leaf = hp.value("min_samples_leaf", p.min_samples_leaf);
                     p.seed = hp.value("seed", p.seed);
                     p.max_features = hp.value("max_features", p.max_features);
                   },
                   [&](BoostedParams& p) {
                     p.n_rounds = hp.value("n_rounds", p.n_rounds);
                     p.max_depth = hp.value("max_depth", p.max_depth);
                     p.learning_rate = hp.value("learning_rate", p.learning_rate);
                     p.l2_leaf = hp.value("l2_leaf", p.l2_leaf);
                     p.min_child_weight = hp.value("min_child_weight", p.min_child_weight);
                   },
                   [&](NeuralParams& p) {
                     p.hidden_width = hp.value("hidden_width", p.hidden_width);
                     p.epochs = hp.value("epochs", p.epochs);
                     p.learning_rate = hp.value("learning_rate", p.learning_rate);
                     p.seed = hp.value("seed", p.seed);
                     p.l2 = hp.value("l2", p.l2);
                   }},
               spec.params);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("invalid hyperparameters: ") + e.what());
  }
  spec.validate();
  return spec;
}

SampleWeights::SampleWeights(std::vector<double> w) : w_(std::move(w)) {
  for (double v : w_) {
    require(std::isfinite(v) && v >= 0.0, ErrorCode::kPrecondition,
            "sample weights must be finite and non-negative");
  }
  require(total() > 0.0, ErrorCode::kPrecondition, "sample weights must have positive total");
}

double SampleWeights::total() const { return std::accumulate(w_.begin(), w_.end(), 0.0); }

void Predictor::check_shape(std::span<const double> x) const {
  require(x.size() == feature_count(), ErrorCode::kShape,
          "expected " + std::to_string(feature_count()) + " features, got " +
              std::to_string(x.size()));
}

std::vector<double> Predictor::predict_proba(const Matrix& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_proba(row_span(x, i));
  return out;
}

std::vector<int> Predictor::predict_labels(const Matrix& x) const {
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_label(row_span(x, i));
  return out;
}

TrainedModel::TrainedModel(ModelSpec spec, std::size_t feature_count, ModelState state,
                           std::vector<std::string> feature_names)
    : spec_(std::move(spec)),
      feature_count_(feature_count),
      state_(std::move(state)),
      feature_names_(std::move(feature_names)) {
  require(spec_.params.index() == state_.index(), ErrorCode::kKind,
          "model state does not match the spec kind");
  require(feature_names_.empty() || feature_names_.size() == feature_count_, ErrorCode::kShape,
          "feature name count does not match feature count");
}

double TrainedModel::predict_proba(std::span<const double> x) const {
  check_shape(x);
  return std::visit(
      overloaded{[&](const LogisticState& s) {
                   const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
                   return sigmoid(s.intercept + s.coef.dot(xv));
                 },
                 [&](const ForestState& s) {
                   double sum = 0.0;
                   for (const auto& t : s.trees) sum += t.predict(x);
                   return sum / static_cast<double>(s.trees.size());
                 },
                 [&](const BoostedState& s) {
                   double m = s.base_margin;
                   for (const auto& t : s.trees) m += t.predict(x);
                   return sigmoid(m);
                 },
                 [&](const NeuralState& s) { return detail::neural_forward(s, x); }},
      state_);
}

double TrainedModel::margin(std::span<const double> x) const {
  check_shape(x);
  if (const auto* s = std::get_if<BoostedState>(&state_)) {
    double m = s->base_margin;
    for (const auto& t : s->trees) m += t.predict(x);
    return m;
  }
  if (const auto* s = std::get_if<LogisticState>(&state_)) {
    const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    return s->intercept + s->coef.dot(xv);
  }
  fail(ErrorCode::kKind, std::string(to_string(kind())) + " models have no margin output");
}

nlohmann::json TrainedModel::to_json() const {
  nlohmann::json params = std::visit(
      overloaded{
          [](const LogisticState& s) -> nlohmann::json {
            return {{"coef", vector_json(s.coef)}, {"intercept", s.intercept}};
          },
          [](const ForestState& s) -> nlohmann::json {
            nlohmann::json trees = nlohmann::json::array();
            for (const auto& t : s.trees) trees.push_back(t.to_json());
            return {{"trees", trees}};
          },
          [](const BoostedState& s) -> nlohmann::json {
            nlohmann::json trees = nlohmann::json::array();
            for (const auto& t : s.trees) trees.push_back(t.to_json());
            return {{"base_margin", s.base_margin}, {"trees", trees}};
          },
          [](const NeuralState& s) -> nlohmann::json {
            const Vector w1 = Eigen::Map<const Vector>(s.hidden_weights.data(), s.hidden_weights.size());
            return {{"input_mean", vector_json(s.input_mean)},
                    {"input_scale", vector_json(s.input_scale)},
                    {"hidden_width", s.hidden_weights.rows()},
                    {"hidden_weights", vector_json(w1)},
                    {"hidden_bias", vector_json(s.hidden_bias)},
                    {"output_weights", vector_json(s.output_weights)},
                    {"output_bias", s.output_bias}};
          }},
      state_);
  return {{"format", "fairaudit-model"},
          {"version", kModelFormatVersion},
          {"spec", spec_.to_json()},
          {"feature_count", feature_count_},
          {"feature_names", feature_names_},
          {"parameters", params}};
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  try {
    require(j.at("format").get<std::string>() == "fairaudit-model", ErrorCode::kParse,
            "not a fairaudit model document");
    const int version = j.at("version").get<int>();
    require(version == kModelFormatVersion, ErrorCode::kParse,
            "unsupported model format version " + std::to_string(version));
    ModelSpec spec = ModelSpec::from_json(j.at("spec"));
    const auto d = j.at("feature_count").get<std::size_t>();
    auto names = j.value("feature_names", std::vector<std::string>{});
    const auto& p = j.at("parameters");
    ModelState state;
    switch (spec.kind()) {
      case ModelKind::kLogistic: {
        LogisticState s;
        s.coef = vector_from_json(p.at("coef"));
        s.intercept = p.at("intercept").get<double>();
        require(static_cast<std::size_t>(s.coef.size()) == d, ErrorCode::kParse, "coef length mismatch");
        state = s;
        break;
      }
      case ModelKind::kForest: {
        ForestState s;
        for (const auto& t : p.at("trees")) s.trees.push_back(Tree::from_json(t));
        require(!s.trees.empty(), ErrorCode::kParse, "forest has no trees");
        state = s;
        break;
      }
      case ModelKind::kBoosted: {
        BoostedState s;
        s.base_margin = p.at("base_margin").get<double>();
        for (const auto& t : p.at("trees")) s.trees.push_back(Tree::from_json(t));
        state = s;
        break;
      }
      case ModelKind::kNeural: {
        NeuralState s;
        s.input_mean = vector_from_json(p.at("input_mean"));
        s.input_scale = vector_from_json(p.at("input_scale"));
        const auto width = p.at("hidden_width").get<Eigen::Index>();
        const Vector w1 = vector_from_json(p.at("hidden_weights"));
        require(w1.size() == width * static_cast<Eigen::Index>(d), ErrorCode::kParse,
                "hidden weight size mismatch");
        s.hidden_weights = Eigen::Map<const Matrix>(w1.data(), width, static_cast<Eigen::Index>(d));
        s.hidden_bias = vector_from_json(p.at("hidden_bias"));
        s.output_weights = vector_from_json(p.at("output_weights"));
        s.output_bias = p.at("output_bias").get<double>();
        state = s;
        break;
      }
    }
    return TrainedModel(std::move(spec), d, std::move(state), std::move(names));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("invalid model document: ") + e.what());
  }
}

TrainedModel train(const ModelSpec& spec, const Dataset& data, const SampleWeights& weights) {
  spec.validate();
  require(weights.size() == data.rows(), ErrorCode::kShape,
          "weights length " + std::to_string(weights.size()) + " does not match " +
              std::to_string(data.rows()) + " training rows");
  double pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) (data.y()[i] ? pos : neg) += weights.values()[i];
  require(pos > 0.0 && neg > 0.0, ErrorCode::kDegenerateFit,
          "training weight is concentrated on a single label");

  const auto& x = data.x();
  const std::span<const int> y = data.y();
  const std::span<const double> w = weights.values();
  ModelState state = std::visit(
      overloaded{[&](const LogisticParams& p) -> ModelState { return detail::fit_logistic(x, y, w, p).state; },
                 [&](const ForestParams& p) -> ModelState { return detail::fit_forest(x, y, w, p); },
                 [&](const BoostedParams& p) -> ModelState { return detail::fit_boosted(x, y, w, p); },
                 [&](const NeuralParams& p) -> ModelState { return detail::fit_neural(x, y, w, p); }},
      spec.params);
  return TrainedModel(spec, data.features(), std::move(state), data.feature_names());
}

TrainedModel train(const ModelSpec& spec, const Dataset& data) {
  return train(spec, data, SampleWeights::uniform(data.rows()));
}

}  // namespace fairaudit
