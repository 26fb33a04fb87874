#include "fairaudit/explain.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "fairaudit/csv.hpp"
#include "fairaudit/mitigate.hpp"

namespace fairaudit {

namespace {

// Memoizes predictions on composite inputs. Binary features make the number of
// distinct composites small, so most evaluations hit.
class PredictionCache {
 public:
  explicit PredictionCache(const Predictor& model) : model_(model) {
    const auto* trained = dynamic_cast<const TrainedModel*>(&model);
    enabled_ = !(trained && trained->kind() == ModelKind::kLogistic);
  }

  double operator()(std::span<const double> x) {
    if (!enabled_) return model_.predict_proba(x);
    key_.assign(reinterpret_cast<const char*>(x.data()), x.size() * sizeof(double));
    if (auto it = values_.find(key_); it != values_.end()) return it->second;
    const double p = model_.predict_proba(x);
    if (values_.size() >= kLimit) values_.clear();
    values_.emplace(key_, p);
    return p;
  }

  const Predictor& model() const { return model_; }

 private:
  static constexpr std::size_t kLimit = 1u << 20;
  const Predictor& model_;
  bool enabled_ = true;
  std::string key_;
  std::unordered_map<std::string, double> values_;
};

// v(S) for one explained row, S given as a bit mask over features.
class Game {
 public:
  Game(PredictionCache& f, std::span<const double> x, const Background& bg)
      : f_(f), x_(x), bg_(bg), composite_(x.size()) {
    require(x.size() == bg.features(), ErrorCode::kShape, "background width does not match the instance");
    require(x.size() == f.model().feature_count(), ErrorCode::kShape,
            "instance width does not match the model");
    total_ = 0.0;
    for (double m : bg.multiplicity()) total_ += m;
    fx = f_(x);
    base = value(0);
  }

  double value(std::uint64_t mask) {
    const std::size_t d = x_.size();
    if (d < 64 && mask == (std::uint64_t{1} << d) - 1) return fx;
    const Matrix& u = bg_.unique_rows();
    double acc = 0.0;
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        composite_[j] = (mask >> j) & 1U ? x_[j] : u(r, static_cast<Eigen::Index>(j));
      }
      acc += bg_.multiplicity()[static_cast<std::size_t>(r)] * f_(composite_);
    }
    return acc / total_;
  }

  double fx = 0.0;
  double base = 0.0;

 private:
  PredictionCache& f_;
  std::span<const double> x_;
  const Background& bg_;
  std::vector<double> composite_;
  double total_ = 0.0;
};

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

ShapExplanation exact_impl(PredictionCache& f, std::span<const double> x, const Background& bg) {
  const std::size_t d = x.size();
  require(d >= 1, ErrorCode::kDegenerateExplanation, "nothing to explain: zero features");
  require(d <= kExactFeatureLimit, ErrorCode::kEnumerationLimit,
          "exact enumeration is limited to " + std::to_string(kExactFeatureLimit) + " features (got " +
              std::to_string(d) + "); use the kernel estimator");
  Game game(f, x, bg);
  const std::uint64_t count = std::uint64_t{1} << d;
  std::vector<double> v(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) v[mask] = game.value(mask);

  // |S|! (d - |S| - 1)! / d!
  std::vector<double> weight(d);
  for (std::size_t s = 0; s < d; ++s) weight[s] = 1.0 / (static_cast<double>(d) * binomial(d - 1, s));

  ShapExplanation out;
  out.phi = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    for (std::size_t i = 0; i < d; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << i;
      if (mask & bit) continue;
      out.phi[static_cast<Eigen::Index>(i)] += weight[size] * (v[mask | bit] - v[mask]);
    }
  }
  out.base_value = game.base;
  out.fx = game.fx;
  return out;
}

ShapExplanation kernel_impl(PredictionCache& f, std::span<const double> x, const Background& bg,
                            std::size_t n_coalitions, std::uint64_t seed) {
  const std::size_t d = x.size();
  require(d >= 1, ErrorCode::kDegenerateExplanation, "nothing to explain: zero features");
  require(d <= 62, ErrorCode::kEnumerationLimit, "kernel estimator supports at most 62 features");
  require(n_coalitions >= 2 * d, ErrorCode::kPrecondition,
          "n_coalitions must be at least 2d (" + std::to_string(2 * d) + ")");
  Game game(f, x, bg);
  ShapExplanation out;
  out.base_value = game.base;
  out.fx = game.fx;
  const double delta = game.fx - game.base;
  if (d == 1) {
    out.phi = Vector::Constant(1, delta);
    return out;
  }

  const std::uint64_t full = (std::uint64_t{1} << d) - 1;
  std::map<std::uint64_t, double> coalitions;
  const double m = static_cast<double>(d);
  if (static_cast<double>(n_coalitions) >= std::ldexp(1.0, static_cast<int>(d)) - 2) {
    for (std::uint64_t mask = 1; mask < full; ++mask) {
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      coalitions[mask] = (m - 1) / (binomial(d, s) * static_cast<double>(s) * (m - static_cast<double>(s)));
    }
  } else {
    // Coalition sizes drawn in proportion to their total kernel weight; each
    // sampled coalition is paired with its complement.
    std::vector<double> cumulative(d - 1);
    double acc = 0.0;
    for (std::size_t s = 1; s < d; ++s) {
      acc += (m - 1) / (static_cast<double>(s) * (m - static_cast<double>(s)));
      cumulative[s - 1] = acc;
    }
    Rng rng(seed);
    std::vector<std::size_t> order(d);
    for (std::size_t pair = 0; pair < n_coalitions / 2; ++pair) {
      const double u = rng.uniform() * acc;
      const std::size_t s =
          1 + static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::uint64_t mask = 0;
      for (std::size_t k = 0; k < std::min(s, d - 1); ++k) {
        const std::size_t pick = k + rng.index(d - k);
        std::swap(order[k], order[pick]);
        mask |= std::uint64_t{1} << order[k];
      }
      coalitions[mask] += 1.0;
      coalitions[full ^ mask] += 1.0;
    }
  }

  // Efficiency is imposed by eliminating the last feature:
  // phi_last = delta - sum of the others.
  const auto k = static_cast<Eigen::Index>(d - 1);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(coalitions.size()), k);
  Vector b(static_cast<Eigen::Index>(coalitions.size()));
  Eigen::Index r = 0;
  for (const auto& [mask, w] : coalitions) {
    const double sw = std::sqrt(w);
    const double last = static_cast<double>((mask >> (d - 1)) & 1U);
    for (Eigen::Index i = 0; i < k; ++i) {
      a(r, i) = sw * (static_cast<double>((mask >> i) & 1U) - last);
    }
    b[r] = sw * (game.value(mask) - game.base - last * delta);
    ++r;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  require(qr.rank() == k, ErrorCode::kDegenerateExplanation,
          "kernel regression is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
              std::to_string(k) + "); increase n_coalitions");
  const Vector head = qr.solve(b);
  out.phi.resize(static_cast<Eigen::Index>(d));
  out.phi.head(k) = head;
  out.phi[k] = delta - head.sum();
  return out;
}

// Interventional attribution of one tree for one (x, background) pair. A leaf
// reached by following x on the features in sx and the background on those in
// sz is the game "all of sx present and none of sz"; its Shapley values are
// closed form.
class TreeWalker {
 public:
  TreeWalker(std::size_t d, Vector& phi) : phi_(phi), state_(d, 0) {
    factorial_.resize(d + 1);
    factorial_[0] = 1.0;
    for (std::size_t i = 1; i <= d; ++i) factorial_[i] = factorial_[i - 1] * static_cast<double>(i);
  }

  void run(const Tree& tree, std::span<const double> x, std::span<const double> b, double scale) {
    tree_ = &tree;
    x_ = x;
    b_ = b;
    scale_ = scale;
    walk(0);
  }

 private:
  void walk(int id) {
    const TreeNode& node = tree_->nodes[static_cast<std::size_t>(id)];
    if (node.feature < 0) {
      const std::size_t n = nx_ + nz_;
      if (n == 0) return;
      const double v = node.value * scale_;
      const double in = nx_ > 0 ? factorial_[nx_ - 1] * factorial_[nz_] / factorial_[n] : 0.0;
      const double out = nz_ > 0 ? factorial_[nx_] * factorial_[nz_ - 1] / factorial_[n] : 0.0;
      for (int f : path_) {
        if (state_[static_cast<std::size_t>(f)] == 1) {
          phi_[f] += in * v;
        } else {
          phi_[f] -= out * v;
        }
      }
      return;
    }
    const auto f = static_cast<std::size_t>(node.feature);
    const int x_child = x_[f] <= node.threshold ? node.left : node.right;
    const int b_child = b_[f] <= node.threshold ? node.left : node.right;
    if (x_child == b_child) {
      walk(x_child);
    } else if (state_[f] == 1) {
      walk(x_child);
    } else if (state_[f] == 2) {
      walk(b_child);
    } else {
      path_.push_back(node.feature);
      state_[f] = 1;
      ++nx_;
      walk(x_child);
      --nx_;
      state_[f] = 2;
      ++nz_;
      walk(b_child);
      --nz_;
      state_[f] = 0;
      path_.pop_back();
    }
  }

  Vector& phi_;
  std::vector<char> state_;  // 0 unseen, 1 follows x, 2 follows background
  std::vector<int> path_;
  std::vector<double> factorial_;
  std::size_t nx_ = 0, nz_ = 0;
  const Tree* tree_ = nullptr;
  std::span<const double> x_, b_;
  double scale_ = 1.0;
};

// Attribution of the sum of tree outputs, averaged over the background.
Vector tree_ensemble_phi(const std::vector<Tree>& trees, double scale, std::span<const double> x,
                         std::span<const double> b) {
  Vector phi = Vector::Zero(static_cast<Eigen::Index>(x.size()));
  TreeWalker walker(x.size(), phi);
  for (const auto& t : trees) walker.run(t, x, b, scale);
  return phi;
}

ShapExplanation tree_member(const TrainedModel& model, std::span<const double> x, const Background& bg,
                            double* rescale_factor) {
  require(x.size() == model.feature_count() && x.size() == bg.features(), ErrorCode::kShape,
          "instance, background and model widths differ");
  const Matrix& u = bg.unique_rows();
  const auto& mult = bg.multiplicity();
  const double total = static_cast<double>(bg.size());
  ShapExplanation out;
  out.phi = Vector::Zero(static_cast<Eigen::Index>(x.size()));
  out.fx = model.predict_proba(x);

  if (model.kind() == ModelKind::kForest) {
    const auto& trees = std::get<ForestState>(model.state()).trees;
    const double scale = 1.0 / static_cast<double>(trees.size());
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      const auto b = row_span(u, r);
      out.phi += (mult[static_cast<std::size_t>(r)] / total) * tree_ensemble_phi(trees, scale, x, b);
      out.base_value += mult[static_cast<std::size_t>(r)] * model.predict_proba(b) / total;
    }
    if (rescale_factor) *rescale_factor = 1.0;
    return out;
  }

  if (model.kind() == ModelKind::kBoosted) {
    const auto& trees = std::get<BoostedState>(model.state()).trees;
    const double mx = model.margin(x);
    std::vector<Vector> per_background;
    std::vector<double> mb(static_cast<std::size_t>(u.rows()));
    Vector margin_phi = Vector::Zero(out.phi.size());
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      const auto b = row_span(u, r);
      per_background.push_back(tree_ensemble_phi(trees, 1.0, x, b));
      mb[static_cast<std::size_t>(r)] = model.margin(b);
      margin_phi += (mult[static_cast<std::size_t>(r)] / total) * per_background.back();
      out.base_value += mult[static_cast<std::size_t>(r)] * sigmoid(mb[static_cast<std::size_t>(r)]) / total;
    }
    const double gap = out.fx - out.base_value;
    const double margin_sum = margin_phi.sum();
    if (std::abs(margin_sum) > 1e-9 && gap / margin_sum > 0) {
      const double factor = gap / margin_sum;
      out.phi = factor * margin_phi;
      if (rescale_factor) *rescale_factor = factor;
      return out;
    }
    // The margin gap vanishes or disagrees in sign with the probability gap:
    // fall back to the secant of the link for each background row.
    for (std::size_t r = 0; r < per_background.size(); ++r) {
      const double dm = mx - mb[r];
      const double slope =
          std::abs(dm) > 1e-12 ? (sigmoid(mx) - sigmoid(mb[r])) / dm : sigmoid(mx) * (1.0 - sigmoid(mx));
      out.phi += (mult[r] / total * slope) * per_background[r];
    }
    if (rescale_factor) *rescale_factor = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  fail(ErrorCode::kKind, std::string("tree estimator needs a forest or boosted model, got ") +
                             std::string(to_string(model.kind())));
}

bool has_tree_structure(const Predictor& model) {
  if (const auto* t = dynamic_cast<const TrainedModel*>(&model)) return is_tree_kind(t->kind());
  if (const auto* m = dynamic_cast<const MixtureModel*>(&model)) {
    return std::all_of(m->members().begin(), m->members().end(),
                       [](const TrainedModel& t) { return is_tree_kind(t.kind()); });
  }
  return false;
}

}  // namespace

Background::Background(Matrix rows) : rows_(std::move(rows)) {
  require(rows_.rows() >= 1, ErrorCode::kPrecondition, "background needs at least one row");
  require(rows_.allFinite(), ErrorCode::kPrecondition, "background rows must be finite");
  std::map<std::vector<double>, std::size_t> seen;
  std::vector<std::vector<double>> distinct;
  for (Eigen::Index r = 0; r < rows_.rows(); ++r) {
    const auto s = row_span(rows_, r);
    std::vector<double> key(s.begin(), s.end());
    auto [it, inserted] = seen.emplace(key, distinct.size());
    if (inserted) {
      distinct.push_back(std::move(key));
      multiplicity_.push_back(0.0);
    }
    multiplicity_[it->second] += 1.0;
  }
  unique_.resize(static_cast<Eigen::Index>(distinct.size()), rows_.cols());
  for (std::size_t r = 0; r < distinct.size(); ++r) {
    for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
      unique_(static_cast<Eigen::Index>(r), j) = distinct[r][static_cast<std::size_t>(j)];
    }
  }
}

Background Background::sample(const Dataset& data, std::size_t size, std::uint64_t seed) {
  require(data.rows() >= 1 && size >= 1, ErrorCode::kPrecondition, "background needs at least one row");
  std::vector<std::size_t> idx(data.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (size < data.rows()) {
    Rng rng(seed);
    rng.shuffle(idx.begin(), idx.end());
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
  }
  Matrix rows(static_cast<Eigen::Index>(idx.size()), data.x().cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    rows.row(static_cast<Eigen::Index>(r)) = data.x().row(static_cast<Eigen::Index>(idx[r]));
  }
  return Background(std::move(rows));
}

std::string Background::fingerprint() const {
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(rows_.rows()),
                                 static_cast<std::uint64_t>(rows_.cols())};
  std::uint64_t h = fnv1a({reinterpret_cast<const unsigned char*>(dims), sizeof(dims)});
  h = fnv1a({reinterpret_cast<const unsigned char*>(rows_.data()),
             static_cast<std::size_t>(rows_.size()) * sizeof(double)},
            h);
  return hex64(h);
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::kExact: return "exact";
    case Estimator::kKernel: return "kernel";
    case Estimator::kTree: return "tree";
  }
  return "unknown";
}

Estimator parse_estimator(const std::string& name) {
  if (name == "exact") return Estimator::kExact;
  if (name == "kernel") return Estimator::kKernel;
  if (name == "tree") return Estimator::kTree;
  fail(ErrorCode::kConfig, "unknown estimator '" + name + "' (expected exact, kernel or tree)");
}

double value_function(const Predictor& model, std::span<const double> x, const std::vector<bool>& coalition,
                      const Background& bg) {
  require(coalition.size() == x.size(), ErrorCode::kShape, "coalition size does not match the instance");
  require(x.size() == bg.features() && x.size() == model.feature_count(), ErrorCode::kShape,
          "instance, background and model widths differ");
  if (std::all_of(coalition.begin(), coalition.end(), [](bool b) { return b; })) return model.predict_proba(x);
  std::vector<double> composite(x.size());
  const Matrix& u = bg.unique_rows();
  double acc = 0.0;
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    for (std::size_t j = 0; j < x.size(); ++j) composite[j] = coalition[j] ? x[j] : u(r, static_cast<Eigen::Index>(j));
    acc += bg.multiplicity()[static_cast<std::size_t>(r)] * model.predict_proba(composite);
  }
  return acc / static_cast<double>(bg.size());
}

ShapExplanation exact_shap(const Predictor& model, std::span<const double> x, const Background& bg) {
  PredictionCache cache(model);
  return exact_impl(cache, x, bg);
}

ShapExplanation kernel_shap(const Predictor& model, std::span<const double> x, const Background& bg,
                            std::size_t n_coalitions, std::uint64_t seed) {
  PredictionCache cache(model);
  return kernel_impl(cache, x, bg, n_coalitions, seed);
}

ShapExplanation tree_shap(const Predictor& model, std::span<const double> x, const Background& bg,
                          double* rescale_factor) {
  if (const auto* t = dynamic_cast<const TrainedModel*>(&model)) return tree_member(*t, x, bg, rescale_factor);
  if (const auto* m = dynamic_cast<const MixtureModel*>(&model)) {
    require(has_tree_structure(*m), ErrorCode::kKind, "tree estimator needs every mixture member to be a tree model");
    ShapExplanation out;
    out.phi = Vector::Zero(static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < m->members().size(); ++j) {
      const double w = m->weights()[j];
      if (w == 0.0) continue;
      const auto e = tree_member(m->members()[j], x, bg, nullptr);
      out.phi += w * e.phi;
      out.base_value += w * e.base_value;
    }
    out.fx = m->predict_proba(x);
    if (rescale_factor) *rescale_factor = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  fail(ErrorCode::kKind, "tree estimator needs a forest or boosted model");
}

ShapExplanation ShapMatrix::row(std::size_t i) const {
  require(i < rows(), ErrorCode::kShape, "row index out of range");
  return {phi.row(static_cast<Eigen::Index>(i)).transpose(), base_values[i], fx[i]};
}

std::filesystem::path ShapMatrix::sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

void ShapMatrix::write(const std::filesystem::path& csv_path) const {
  {
    std::ofstream out(csv_path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + csv_path.string());
    csv::Record header = {"row_id", "base_value", "fx"};
    for (const auto& name : feature_names) header.push_back("phi_" + name);
    csv::write_record(out, header);
    for (std::size_t i = 0; i < rows(); ++i) {
      csv::Record rec = {row_ids[i], csv::format_double(base_values[i]), csv::format_double(fx[i])};
      for (Eigen::Index j = 0; j < phi.cols(); ++j) {
        rec.push_back(csv::format_double(phi(static_cast<Eigen::Index>(i), j)));
      }
      csv::write_record(out, rec);
    }
    require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + csv_path.string());
  }
  const nlohmann::json side = {{"estimator", to_string(estimator)},
                               {"seed", seed},
                               {"background_rows", background_rows},
                               {"background_fingerprint", background_fingerprint},
                               {"n_coalitions", n_coalitions},
                               {"feature_names", feature_names},
                               {"rows", rows()},
                               {"metadata", metadata}};
  std::ofstream out(sidecar_path(csv_path), std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + sidecar_path(csv_path).string());
  out << side.dump(2) << '\n';
}

ShapMatrix ShapMatrix::read(const std::filesystem::path& csv_path) {
  const auto records = csv::read_file(csv_path);
  require(!records.empty(), ErrorCode::kParse, csv_path.string() + ": empty SHAP file");
  const auto& header = records.front();
  require(header.size() >= 4 && header[0] == "row_id" && header[1] == "base_value" && header[2] == "fx",
          ErrorCode::kParse, csv_path.string() + ": header must start with row_id, base_value, fx");
  ShapMatrix m;
  for (std::size_t j = 3; j < header.size(); ++j) {
    require(header[j].rfind("phi_", 0) == 0, ErrorCode::kParse,
            csv_path.string() + ": column '" + header[j] + "' is not a phi_ column");
    m.feature_names.push_back(header[j].substr(4));
  }
  const std::size_t d = m.feature_names.size();
  m.phi.resize(static_cast<Eigen::Index>(records.size() - 1), static_cast<Eigen::Index>(d));
  auto number = [&](const std::string& cell, std::size_t row) {
    double v = 0.0;
    const auto* end = cell.data() + cell.size();
    const auto res = std::from_chars(cell.data(), end, v);
    require(res.ec == std::errc() && res.ptr == end && std::isfinite(v), ErrorCode::kParse,
            csv_path.string() + ": row " + std::to_string(row) + ": bad number '" + cell + "'");
    return v;
  };
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    require(rec.size() == header.size(), ErrorCode::kParse,
            csv_path.string() + ": row " + std::to_string(r) + " has the wrong number of fields");
    m.row_ids.push_back(rec[0]);
    m.base_values.push_back(number(rec[1], r));
    m.fx.push_back(number(rec[2], r));
    for (std::size_t j = 0; j < d; ++j) {
      m.phi(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) = number(rec[3 + j], r);
    }
  }

  const auto side_path = sidecar_path(csv_path);
  std::ifstream in(side_path);
  require(static_cast<bool>(in), ErrorCode::kIo, "missing SHAP sidecar " + side_path.string());
  try {
    const auto side = nlohmann::json::parse(in);
    m.estimator = parse_estimator(side.at("estimator").get<std::string>());
    m.seed = side.at("seed").get<std::uint64_t>();
    m.background_rows = side.at("background_rows").get<std::size_t>();
    m.background_fingerprint = side.at("background_fingerprint").get<std::string>();
    m.n_coalitions = side.value("n_coalitions", std::size_t{0});
    m.metadata = side.value("metadata", nlohmann::json::object());
    require(side.at("feature_names").get<std::vector<std::string>>() == m.feature_names, ErrorCode::kParse,
            side_path.string() + ": feature names disagree with the CSV header");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, side_path.string() + ": " + e.what());
  }
  return m;
}

Estimator default_estimator(const Predictor& model) {
  if (const auto* t = dynamic_cast<const TrainedModel*>(&model)) {
    if (is_tree_kind(t->kind())) return Estimator::kTree;
    return t->feature_count() <= kExactFeatureLimit ? Estimator::kExact : Estimator::kKernel;
  }
  return Estimator::kKernel;
}

ShapMatrix explain_testset(const Predictor& model, const Dataset& test, const Background& bg, Estimator estimator,
                           const ExplainParams& params) {
  const std::size_t d = model.feature_count();
  require(test.rows() == 0 || test.features() == d, ErrorCode::kShape,
          "test data has " + std::to_string(test.features()) + " features, model expects " + std::to_string(d));
  require(bg.features() == d, ErrorCode::kShape, "background width does not match the model");
  if (estimator == Estimator::kTree) {
    require(has_tree_structure(model), ErrorCode::kConfig,
            "tree estimator is only available for forest and boosted models (or mixtures of them)");
  }

  ShapMatrix out;
  out.estimator = estimator;
  out.feature_names = test.feature_names();
  out.row_ids = test.row_ids();
  out.seed = params.seed;
  out.background_rows = bg.size();
  out.background_fingerprint = bg.fingerprint();
  out.n_coalitions = estimator == Estimator::kKernel ? params.n_coalitions : 0;
  const std::size_t n = test.rows();
  out.phi = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  out.base_values.assign(n, 0.0);
  out.fx.assign(n, 0.0);
  std::vector<double> factors(n, 1.0);
  std::vector<std::exception_ptr> errors(n);

  auto work = [&](unsigned worker, unsigned stride) {
    PredictionCache cache(model);
    for (std::size_t i = worker; i < n; i += stride) {
      try {
        ShapExplanation e;
        switch (estimator) {
          case Estimator::kExact: e = exact_impl(cache, test.row(i), bg); break;
          case Estimator::kKernel:
            e = kernel_impl(cache, test.row(i), bg, params.n_coalitions, derive_seed(params.seed, i));
            break;
          case Estimator::kTree: e = tree_shap(model, test.row(i), bg, &factors[i]); break;
        }
        out.phi.row(static_cast<Eigen::Index>(i)) = e.phi.transpose();
        out.base_values[i] = e.base_value;
        out.fx[i] = e.fx;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1U, std::min<unsigned>(params.threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  if (estimator == Estimator::kTree) {
    const auto* t = dynamic_cast<const TrainedModel*>(&model);
    if (t && t->kind() == ModelKind::kBoosted) {
      nlohmann::json f = nlohmann::json::array();
      for (double v : factors) f.push_back(std::isnan(v) ? nlohmann::json() : nlohmann::json(v));
      out.metadata["link"] = "margin_rescaled";
      out.metadata["margin_rescale_factors"] = std::move(f);
    } else {
      out.metadata["link"] = "probability";
    }
  }
  return out;
}

std::string to_string(GroupFilter g) {
  switch (g) {
    case GroupFilter::kOverall: return "overall";
    case GroupFilter::kBlack: return "black";
    case GroupFilter::kNonBlack: return "nonblack";
  }
  return "unknown";
}

GroupFilter parse_group_filter(const std::string& name) {
  if (name == "overall") return GroupFilter::kOverall;
  if (name == "black") return GroupFilter::kBlack;
  if (name == "nonblack") return GroupFilter::kNonBlack;
  fail(ErrorCode::kConfig, "unknown group filter '" + name + "'");
}

GlobalImportance global_importance(const ShapMatrix& matrix, const Dataset& test, GroupFilter group) {
  require(matrix.rows() == test.rows() && matrix.row_ids == test.row_ids(), ErrorCode::kShape,
          "SHAP matrix rows do not match the test rows");
  GlobalImportance out;
  out.group = group;
  out.feature_names = matrix.feature_names;
  out.importance.assign(static_cast<std::size_t>(matrix.phi.cols()), 0.0);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const int a = test.a()[i];
    if ((group == GroupFilter::kBlack && a != 1) || (group == GroupFilter::kNonBlack && a != 0)) continue;
    ++out.rows;
    for (Eigen::Index j = 0; j < matrix.phi.cols(); ++j) {
      out.importance[static_cast<std::size_t>(j)] += std::abs(matrix.phi(static_cast<Eigen::Index>(i), j));
    }
  }
  require(out.rows > 0, ErrorCode::kEmptyGroup, "no rows in group '" + to_string(group) + "'");
  for (auto& v : out.importance) v /= static_cast<double>(out.rows);
  return out;
}

}  // namespace fairaudit
