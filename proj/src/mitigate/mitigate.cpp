#include "fairaudit/mitigate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fairaudit/detail/simplex.hpp"

namespace fairaudit {

namespace {

constexpr double kPrecision = 1e-8;
constexpr double kShrinkRegret = 0.8;
constexpr double kShrinkEta = 0.8;
constexpr double kRegretCheckStart = 5;
constexpr double kRegretCheckIncrease = 1.6;
constexpr double kBurnInFraction = 0.1;

std::string cell_name(int a, int y) {
  return "(a=" + std::to_string(a) + ", y=" + std::to_string(y) + ")";
}

struct CellCounts {
  std::array<double, 4> cell{};   // index 2 * y + a
  std::array<double, 2> label{};  // index y
};

CellCounts count_cells(const Dataset& data) {
  CellCounts c;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    c.cell[static_cast<std::size_t>(2 * data.y()[i] + data.a()[i])] += 1.0;
    c.label[static_cast<std::size_t>(data.y()[i])] += 1.0;
  }
  for (int y = 0; y < 2; ++y) {
    for (int a = 0; a < 2; ++a) {
      require(c.cell[static_cast<std::size_t>(2 * y + a)] > 0, ErrorCode::kUndefinedMoment,
              "moment undefined: no rows in cell " + cell_name(a, y));
    }
  }
  return c;
}

template <typename T>
MomentVector moments_impl(std::span<const T> predictions, const Dataset& data) {
  require(predictions.size() == data.rows(), ErrorCode::kShape,
          "prediction count does not match dataset rows");
  const auto counts = count_cells(data);
  std::array<double, 4> cell_sum{};
  std::array<double, 2> label_sum{};
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const double p = static_cast<double>(predictions[i]);
    cell_sum[static_cast<std::size_t>(2 * data.y()[i] + data.a()[i])] += p;
    label_sum[static_cast<std::size_t>(data.y()[i])] += p;
  }
  MomentVector m;
  for (int y = 0; y < 2; ++y) {
    const double pooled = label_sum[static_cast<std::size_t>(y)] / counts.label[static_cast<std::size_t>(y)];
    for (int a = 0; a < 2; ++a) {
      const auto c = static_cast<std::size_t>(2 * y + a);
      const double diff = cell_sum[c] / counts.cell[c] - pooled;
      m.gamma[MomentVector::index(a, y, false)] = diff;
      m.gamma[MomentVector::index(a, y, true)] = -diff;
    }
  }
  return m;
}

double dot(const MomentArray& a, const MomentArray& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double lambda_sum(const MomentArray& l) { return std::accumulate(l.begin(), l.end(), 0.0); }

// Error and moments of a (possibly randomized) classifier on the training set.
struct Evaluation {
  double error = 0.0;
  MomentArray gamma{};
};

struct Hypothesis {
  TrainedModel model;
  std::vector<double> probas;  // on the training rows
  Evaluation eval;
  std::size_t oracle_call = 0;
};

struct Gap {
  double lagrangian = 0.0;
  double high = 0.0;
  double low = 0.0;
  double value() const { return std::max(lagrangian - low, high - lagrangian); }
};

class Lagrangian {
 public:
  Lagrangian(const ModelSpec& spec, const Dataset& train, const EgConfig& cfg)
      : spec_(spec), train_(train), cfg_(cfg) {}

  double value(const Evaluation& e, const MomentArray& lambda) const {
    double v = e.error;
    for (std::size_t k = 0; k < kMomentCount; ++k) v += lambda[k] * (e.gamma[k] - cfg_.eps);
    return v;
  }

  double high(const Evaluation& e) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (double g : e.gamma) worst = std::max(worst, g - cfg_.eps);
    return worst <= 0 ? e.error : e.error + cfg_.bound * worst;
  }

  Evaluation evaluate_labels(std::span<const int> labels) const {
    Evaluation e;
    double wrong = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) wrong += labels[i] != train_.y()[i];
    e.error = wrong / static_cast<double>(labels.size());
    e.gamma = eod_moments(labels, train_).gamma;
    return e;
  }

  /// Trains the best response to `lambda`; keeps it only if it beats every
  /// cached hypothesis. Returns the index of the best cached hypothesis.
  std::size_t best_h(const MomentArray& lambda, int iteration) {
    const auto problem = cost_sensitive_relabel(lambda, train_);
    oracle_lambdas.push_back(lambda);
    const std::size_t call = oracle_lambdas.size() - 1;
    Hypothesis h{fit(problem, iteration), {}, {}, call};
    h.probas = h.model.predict_proba(train_.x());
    std::vector<int> labels(h.probas.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = h.probas[i] >= 0.5 ? 1 : 0;
    h.eval = evaluate_labels(labels);

    const double h_value = h.eval.error + dot(h.eval.gamma, lambda);
    std::size_t best = hs.size();
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < hs.size(); ++j) {
      const double v = hs[j].eval.error + dot(hs[j].eval.gamma, lambda);
      if (v < best_value) {
        best_value = v;
        best = j;
      }
    }
    if (h_value < best_value - kPrecision) {
      hs.push_back(std::move(h));
      return hs.size() - 1;
    }
    return best;
  }

  /// Duality gaps of several candidate mixtures against the same dual.
  /// The lower value L_low is shared: best responses to multiples of
  /// lambda_hat and the candidates themselves.
  std::vector<Gap> gaps(const MomentArray& lambda_hat, const std::vector<Evaluation>& candidates,
                        int iteration) {
    std::vector<Gap> out;
    double low = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) {
      Gap g;
      g.lagrangian = value(c, lambda_hat);
      g.high = high(c);
      low = std::min(low, g.lagrangian);
      out.push_back(g);
    }
    for (double mul : {1.0, 2.0, 5.0, 10.0}) {
      MomentArray scaled = lambda_hat;
      for (auto& v : scaled) v *= mul;
      const auto idx = best_h(scaled, iteration);
      low = std::min(low, value(hs[idx].eval, lambda_hat));
      double smallest = std::numeric_limits<double>::infinity();
      for (auto& g : out) {
        g.low = low;
        smallest = std::min(smallest, g.value());
      }
      if (smallest > cfg_.nu + kPrecision) break;
    }
    return out;
  }

  std::vector<Hypothesis> hs;
  std::vector<MomentArray> oracle_lambdas;

 private:
  TrainedModel fit(const RelabeledProblem& problem, int iteration) const {
    try {
      return train(spec_, train_.with_labels(problem.labels), SampleWeights(problem.weights));
    } catch (const Error& e) {
      fail(e.code() == ErrorCode::kPrecondition ? ErrorCode::kDegenerateFit : e.code(),
           "best response at iteration " + std::to_string(iteration) + ": " + e.what());
    }
  }

  const ModelSpec& spec_;
  const Dataset& train_;
  const EgConfig& cfg_;
};

// Mixture weights over cached hypotheses.
using Weights = std::vector<double>;

Evaluation randomized_eval(const std::vector<Hypothesis>& hs, const Weights& q) {
  Evaluation e;
  for (std::size_t j = 0; j < hs.size(); ++j) {
    if (q[j] == 0.0) continue;
    e.error += q[j] * hs[j].eval.error;
    for (std::size_t k = 0; k < kMomentCount; ++k) e.gamma[k] += q[j] * hs[j].eval.gamma[k];
  }
  return e;
}

Evaluation deterministic_eval(const Lagrangian& lag, const Weights& q, std::size_t n) {
  std::vector<double> proba(n, 0.0);
  for (std::size_t j = 0; j < lag.hs.size(); ++j) {
    if (q[j] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) proba[i] += q[j] * lag.hs[j].probas[i];
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = proba[i] >= 0.5 ? 1 : 0;
  return lag.evaluate_labels(labels);
}

Weights uniform_after_burn_in(const std::vector<std::size_t>& chosen, std::size_t n_hs) {
  const auto burn = static_cast<std::size_t>(std::floor(kBurnInFraction * static_cast<double>(chosen.size())));
  Weights q(n_hs, 0.0);
  for (std::size_t t = burn; t < chosen.size(); ++t) q[chosen[t]] += 1.0;
  const double total = static_cast<double>(chosen.size() - burn);
  for (auto& v : q) v /= total;
  return q;
}

// min sum_j q_j err_j + B s  s.t.  sum_j q_j (gamma_jk - eps) <= s,  sum q = 1.
std::optional<Weights> linear_program_weights(const std::vector<Hypothesis>& hs, const EgConfig& cfg) {
  const auto m = static_cast<Eigen::Index>(hs.size());
  Vector c(m + 1);
  Eigen::MatrixXd a_ub(kMomentCount, m + 1);
  for (Eigen::Index j = 0; j < m; ++j) {
    c[j] = hs[static_cast<std::size_t>(j)].eval.error;
    for (std::size_t k = 0; k < kMomentCount; ++k) {
      a_ub(static_cast<Eigen::Index>(k), j) = hs[static_cast<std::size_t>(j)].eval.gamma[k] - cfg.eps;
    }
  }
  c[m] = cfg.bound;
  a_ub.col(m).setConstant(-1.0);
  Eigen::MatrixXd a_eq = Eigen::MatrixXd::Zero(1, m + 1);
  a_eq.block(0, 0, 1, m).setOnes();
  const auto x = detail::solve_linear_program(c, a_ub, Vector::Zero(kMomentCount), a_eq, Vector::Ones(1));
  if (!x) return std::nullopt;
  Weights q(hs.size());
  double total = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    q[static_cast<std::size_t>(j)] = std::max(0.0, (*x)[j]);
    total += q[static_cast<std::size_t>(j)];
  }
  if (!(total > 0)) return std::nullopt;
  for (auto& v : q) v /= total;
  return q;
}

nlohmann::json moments_json(const MomentArray& m) { return std::vector<double>(m.begin(), m.end()); }

MomentArray moments_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  require(v.size() == kMomentCount, ErrorCode::kParse, "moment vector must have 8 entries");
  MomentArray m{};
  std::copy(v.begin(), v.end(), m.begin());
  return m;
}

nlohmann::json iteration_json(const EgIteration& it) {
  return {{"type", "iteration"},
          {"iteration", it.iteration},
          {"lambda", moments_json(it.lambda)},
          {"gamma", moments_json(it.gamma)},
          {"loss", it.loss},
          {"gap", it.gap},
          {"mixture_max_violation", it.mixture_max_violation},
          {"best_response", it.best_response}};
}

EgIteration iteration_from_json(const nlohmann::json& j) {
  EgIteration it;
  it.iteration = j.at("iteration").get<int>();
  it.lambda = moments_from_json(j.at("lambda"));
  it.gamma = moments_from_json(j.at("gamma"));
  it.loss = j.at("loss").get<double>();
  it.gap = j.at("gap").get<double>();
  it.mixture_max_violation = j.at("mixture_max_violation").get<double>();
  it.best_response = j.at("best_response").get<int>();
  return it;
}

}  // namespace

void EgConfig::validate() const {
  require(eps > 0, ErrorCode::kConfig, "eps must be positive");
  require(max_iters >= 1, ErrorCode::kConfig, "max_iters must be at least 1");
  require(eta > 0, ErrorCode::kConfig, "eta must be positive");
  require(bound > 0, ErrorCode::kConfig, "bound must be positive");
  require(nu >= 0, ErrorCode::kConfig, "nu must be non-negative");
}

nlohmann::json EgConfig::to_json() const {
  return {{"eps", eps}, {"max_iters", max_iters}, {"eta", eta}, {"bound", bound}, {"nu", nu}};
}

EgConfig EgConfig::from_json(const nlohmann::json& j) {
  EgConfig c;
  require(j.is_object(), ErrorCode::kConfig, "mitigation config must be an object");
  for (const auto& [key, _] : j.items()) {
    require(key == "eps" || key == "max_iters" || key == "eta" || key == "bound" || key == "nu", ErrorCode::kConfig,
            "unknown mitigation key '" + key + "'");
  }
  try {
    c.eps = j.value("eps", c.eps);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.eta = j.value("eta", c.eta);
    c.bound = j.value("bound", c.bound);
    c.nu = j.value("nu", c.nu);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("invalid mitigation config: ") + e.what());
  }
  c.validate();
  return c;
}

MomentArray MomentVector::violations(double eps) const {
  MomentArray v = gamma;
  for (auto& x : v) x -= eps;
  return v;
}

double MomentVector::max_violation(double eps) const {
  const auto v = violations(eps);
  return *std::max_element(v.begin(), v.end());
}

MomentVector eod_moments(std::span<const int> predictions, const Dataset& data) {
  return moments_impl(predictions, data);
}

MomentVector eod_moments(std::span<const double> predictions, const Dataset& data) {
  return moments_impl(predictions, data);
}

RelabeledProblem cost_sensitive_relabel(const MomentArray& lambda, const Dataset& data, double bound) {
  for (double l : lambda) {
    require(std::isfinite(l) && l >= 0.0, ErrorCode::kPrecondition, "dual weights must be non-negative");
  }
  if (bound > 0) {
    require(lambda_sum(lambda) <= bound * (1.0 + 1e-12), ErrorCode::kPrecondition,
            "dual weights exceed the l1 bound");
  }
  const auto counts = count_cells(data);
  const double n = static_cast<double>(data.rows());

  // Net dual pressure per (a, y): lambda(+) - lambda(-).
  std::array<double, 4> net{};
  std::array<double, 2> pooled{};
  for (int y = 0; y < 2; ++y) {
    for (int a = 0; a < 2; ++a) {
      const double v = lambda[MomentVector::index(a, y, false)] - lambda[MomentVector::index(a, y, true)];
      net[static_cast<std::size_t>(2 * y + a)] = v;
      pooled[static_cast<std::size_t>(y)] += v;
    }
  }

  RelabeledProblem out;
  out.labels.resize(data.rows());
  out.weights.resize(data.rows());
  out.cost_difference.resize(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const int y = data.y()[i];
    const auto c = static_cast<std::size_t>(2 * y + data.a()[i]);
    const double cost = (1.0 - 2.0 * y) / n + net[c] / counts.cell[c] -
                        pooled[static_cast<std::size_t>(y)] / counts.label[static_cast<std::size_t>(y)];
    out.cost_difference[i] = cost;
    out.labels[i] = cost < 0.0 ? 1 : 0;
    out.weights[i] = std::abs(cost);
  }
  return out;
}

MixtureModel::MixtureModel(std::vector<TrainedModel> members, std::vector<double> weights)
    : members_(std::move(members)), weights_(std::move(weights)) {
  require(!members_.empty(), ErrorCode::kPrecondition, "mixture needs at least one member");
  require(members_.size() == weights_.size(), ErrorCode::kShape,
          "mixture member and weight counts differ");
  double total = 0.0;
  for (double w : weights_) {
    require(std::isfinite(w) && w >= 0.0, ErrorCode::kPrecondition, "mixture weights must be non-negative");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::kPrecondition, "mixture weights must sum to 1");
  for (const auto& m : members_) {
    require(m.feature_count() == members_.front().feature_count(), ErrorCode::kShape,
            "mixture members disagree on feature count");
  }
}

double MixtureModel::predict_proba(std::span<const double> x) const {
  check_shape(x);
  double p = 0.0;
  for (std::size_t j = 0; j < members_.size(); ++j) p += weights_[j] * members_[j].predict_proba(x);
  return std::clamp(p, 0.0, 1.0);
}

nlohmann::json MixtureModel::to_json() const {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : members_) members.push_back(m.to_json());
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& it : history) hist.push_back(iteration_json(it));
  nlohmann::json member_l = nlohmann::json::array();
  for (const auto& l : member_lambdas) member_l.push_back(moments_json(l));
  return {{"format", "fairaudit-mixture"},
          {"version", 1},
          {"config", config.to_json()},
          {"member_weights", weights_},
          {"member_lambdas", member_l},
          {"member_calls", member_calls},
          {"final_gap", final_gap},
          {"early_stopped", early_stopped},
          {"selection", selection},
          {"history", hist},
          {"members", members}};
}

MixtureModel MixtureModel::from_json(const nlohmann::json& j) {
  try {
    require(j.at("format").get<std::string>() == "fairaudit-mixture", ErrorCode::kParse,
            "not a fairaudit mixture document");
    std::vector<TrainedModel> members;
    for (const auto& m : j.at("members")) members.push_back(TrainedModel::from_json(m));
    MixtureModel mix(std::move(members), j.at("member_weights").get<std::vector<double>>());
    mix.config = EgConfig::from_json(j.at("config"));
    mix.final_gap = j.at("final_gap").get<double>();
    mix.early_stopped = j.value("early_stopped", false);
    mix.selection = j.value("selection", std::string("uniform"));
    for (const auto& l : j.value("member_lambdas", nlohmann::json::array())) {
      mix.member_lambdas.push_back(moments_from_json(l));
    }
    mix.member_calls = j.value("member_calls", std::vector<int>{});
    for (const auto& it : j.value("history", nlohmann::json::array())) {
      mix.history.push_back(iteration_from_json(it));
    }
    return mix;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("invalid mixture document: ") + e.what());
  }
}

MixtureModel exponentiated_gradient(const ModelSpec& spec, const Dataset& train, const EgConfig& cfg) {
  cfg.validate();
  spec.validate();
  count_cells(train);
  const std::size_t n = train.rows();

  Lagrangian lag(spec, train, cfg);
  // Log-weights of the moments plus a fixed slack coordinate. With the slack
  // at log(K) the first dual is B / (2K) on every moment.
  MomentArray log_weight{};
  const double slack_log = std::log(static_cast<double>(kMomentCount));
  double eta = cfg.eta / cfg.bound;

  std::vector<MomentArray> lambdas;
  MomentArray lambda_total{};
  std::vector<std::size_t> chosen;
  std::vector<double> randomized_gaps;
  double last_regret_checked = kRegretCheckStart;
  double last_gap = std::numeric_limits<double>::infinity();
  std::vector<EgIteration> history;
  bool early_stopped = false;

  for (int t = 0; t < cfg.max_iters; ++t) {
    double top = slack_log;
    for (double v : log_weight) top = std::max(top, v);
    double denom = std::exp(slack_log - top);
    for (double v : log_weight) denom += std::exp(v - top);
    MomentArray lambda{};
    for (std::size_t k = 0; k < kMomentCount; ++k) lambda[k] = cfg.bound * std::exp(log_weight[k] - top) / denom;
    lambdas.push_back(lambda);
    for (std::size_t k = 0; k < kMomentCount; ++k) lambda_total[k] += lambda[k];
    MomentArray lambda_hat{};
    for (std::size_t k = 0; k < kMomentCount; ++k) lambda_hat[k] = lambda_total[k] / static_cast<double>(t + 1);

    const std::size_t h_idx = lag.best_h(lambda, t);
    chosen.push_back(h_idx);
    const MomentArray gamma = lag.hs[h_idx].eval.gamma;

    const Weights q = uniform_after_burn_in(chosen, lag.hs.size());
    const auto gaps = lag.gaps(lambda_hat, {randomized_eval(lag.hs, q), deterministic_eval(lag, q, n)}, t);
    const Evaluation det = deterministic_eval(lag, uniform_after_burn_in(chosen, lag.hs.size()), n);
    randomized_gaps.push_back(gaps[0].value());

    EgIteration it;
    it.iteration = t;
    it.lambda = lambda;
    it.gamma = gamma;
    it.loss = lag.hs[h_idx].eval.error;
    it.gap = gaps[1].value();
    it.mixture_max_violation = MomentVector{det.gamma}.max_violation(cfg.eps);
    it.best_response = static_cast<int>(lag.hs[h_idx].oracle_call);
    history.push_back(it);

    if (it.gap <= cfg.nu) {
      early_stopped = true;
      break;
    }

    if (t >= last_regret_checked * kRegretCheckIncrease) {
      const double best_gap = *std::min_element(randomized_gaps.begin(), randomized_gaps.end());
      if (best_gap > last_gap * kShrinkRegret) eta *= kShrinkEta;
      last_regret_checked = t;
      last_gap = best_gap;
    }
    for (std::size_t k = 0; k < kMomentCount; ++k) log_weight[k] += eta * (gamma[k] - cfg.eps);
  }

  // Final selection: burn-in uniform average unless the linear program over
  // all cached best responses has a strictly smaller gap.
  MomentArray lambda_hat{};
  for (std::size_t k = 0; k < kMomentCount; ++k) lambda_hat[k] = lambda_total[k] / static_cast<double>(lambdas.size());
  Weights q = uniform_after_burn_in(chosen, lag.hs.size());
  std::string selection = "uniform";
  double final_gap = history.back().gap;
  if (!early_stopped) {
    const auto lp = linear_program_weights(lag.hs, cfg);
    std::vector<Evaluation> candidates = {deterministic_eval(lag, q, n)};
    if (lp) candidates.push_back(deterministic_eval(lag, *lp, n));
    const auto gaps = lag.gaps(lambda_hat, candidates, cfg.max_iters);
    final_gap = gaps[0].value();
    if (lp && gaps[1].value() < final_gap) {
      // Weights over hypotheses cached before the gap evaluation stay valid.
      q = *lp;
      q.resize(lag.hs.size(), 0.0);
      final_gap = gaps[1].value();
      selection = "linear_program";
    }
  }
  q.resize(lag.hs.size(), 0.0);

  std::vector<TrainedModel> members;
  std::vector<double> weights;
  std::vector<MomentArray> member_lambdas;
  std::vector<int> member_calls;
  double total = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (q[j] > 0) total += q[j];
  }
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (q[j] <= 0) continue;
    members.push_back(lag.hs[j].model);
    weights.push_back(q[j] / total);
    member_lambdas.push_back(lag.oracle_lambdas[lag.hs[j].oracle_call]);
    member_calls.push_back(static_cast<int>(lag.hs[j].oracle_call));
  }
  MixtureModel mixture(std::move(members), std::move(weights));
  mixture.history = std::move(history);
  mixture.final_gap = final_gap;
  mixture.early_stopped = early_stopped;
  mixture.selection = selection;
  mixture.member_lambdas = std::move(member_lambdas);
  mixture.member_calls = std::move(member_calls);
  mixture.oracle_lambdas = lag.oracle_lambdas;
  mixture.config = cfg;
  return mixture;
}

void write_trace(const MixtureModel& mixture, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write trace " + path.string());
  for (const auto& it : mixture.history) out << iteration_json(it).dump() << '\n';
  nlohmann::json member_l = nlohmann::json::array();
  for (const auto& l : mixture.member_lambdas) member_l.push_back(moments_json(l));
  nlohmann::json oracle_l = nlohmann::json::array();
  for (const auto& l : mixture.oracle_lambdas) oracle_l.push_back(moments_json(l));
  nlohmann::json closing = {{"type", "mixture"},
                            {"config", mixture.config.to_json()},
                            {"member_lambdas", member_l},
                            {"member_calls", mixture.member_calls},
                            {"oracle_lambdas", oracle_l},
                            {"member_weights", mixture.weights()},
                            {"final_gap", mixture.final_gap},
                            {"early_stopped", mixture.early_stopped},
                            {"selection", mixture.selection}};
  out << closing.dump() << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

MixtureModel replay_trace(const std::filesystem::path& path, const ModelSpec& spec, const Dataset& train) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open trace " + path.string());
  std::vector<EgIteration> history;
  nlohmann::json closing;
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "iteration") {
        history.push_back(iteration_from_json(j));
      } else if (type == "mixture") {
        closing = std::move(j);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, "malformed trace " + path.string() + ": " + e.what());
  }
  require(!closing.is_null(), ErrorCode::kParse, "trace has no closing mixture record");

  try {
    const EgConfig cfg = EgConfig::from_json(closing.at("config"));
    std::vector<MomentArray> oracle_lambdas;
    for (const auto& l : closing.at("oracle_lambdas")) oracle_lambdas.push_back(moments_from_json(l));
    const auto member_calls = closing.at("member_calls").get<std::vector<int>>();

    std::map<int, TrainedModel> retrained;
    auto model_for = [&](int call) -> const TrainedModel& {
      require(call >= 0 && static_cast<std::size_t>(call) < oracle_lambdas.size(), ErrorCode::kParse,
              "trace refers to unknown oracle call " + std::to_string(call));
      auto found = retrained.find(call);
      if (found == retrained.end()) {
        const auto problem = cost_sensitive_relabel(oracle_lambdas[static_cast<std::size_t>(call)], train);
        found = retrained
                    .emplace(call, fairaudit::train(spec, train.with_labels(problem.labels),
                                                    SampleWeights(problem.weights)))
                    .first;
      }
      return found->second;
    };

    for (const auto& it : history) {
      const auto labels = model_for(it.best_response).predict_labels(train.x());
      double wrong = 0.0;
      for (std::size_t i = 0; i < labels.size(); ++i) wrong += labels[i] != train.y()[i];
      const double loss = wrong / static_cast<double>(labels.size());
      const auto gamma = eod_moments(labels, train).gamma;
      bool same = std::abs(loss - it.loss) <= 1e-9;
      for (std::size_t k = 0; k < kMomentCount; ++k) same = same && std::abs(gamma[k] - it.gamma[k]) <= 1e-9;
      require(same, ErrorCode::kParse,
              "replayed best response does not match iteration " + std::to_string(it.iteration));
    }

    std::vector<TrainedModel> members;
    std::vector<MomentArray> member_lambdas;
    for (int call : member_calls) {
      members.push_back(model_for(call));
      member_lambdas.push_back(oracle_lambdas[static_cast<std::size_t>(call)]);
    }
    MixtureModel mix(std::move(members), closing.at("member_weights").get<std::vector<double>>());
    mix.history = std::move(history);
    mix.final_gap = closing.at("final_gap").get<double>();
    mix.early_stopped = closing.value("early_stopped", false);
    mix.selection = closing.value("selection", std::string("uniform"));
    mix.member_lambdas = std::move(member_lambdas);
    mix.member_calls = member_calls;
    mix.oracle_lambdas = std::move(oracle_lambdas);
    mix.config = cfg;
    return mix;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, "malformed trace " + path.string() + ": " + e.what());
  }
}

}  // namespace fairaudit
