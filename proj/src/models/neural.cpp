#include <numeric>

#include "fairaudit/detail/learners.hpp"

namespace fairaudit::detail {

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

double neural_forward(const NeuralState& s, std::span<const double> x) {
  const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Vector xs = ((xv - s.input_mean).array() / s.input_scale.array()).matrix();
  const Vector hidden = (s.hidden_weights * xs + s.hidden_bias).array().tanh().matrix();
  return sigmoid(s.output_weights.dot(hidden) + s.output_bias);
}

Vector flatten(const NeuralState& s) {
  const Eigen::Index h = s.hidden_weights.rows(), d = s.hidden_weights.cols();
  Vector theta(h * d + h + h + 1);
  theta.head(h * d) = Eigen::Map<const Vector>(s.hidden_weights.data(), h * d);
  theta.segment(h * d, h) = s.hidden_bias;
  theta.segment(h * d + h, h) = s.output_weights;
  theta[h * d + 2 * h] = s.output_bias;
  return theta;
}

void unflatten(const Vector& theta, NeuralState& s) {
  const Eigen::Index h = s.hidden_weights.rows(), d = s.hidden_weights.cols();
  s.hidden_weights = Eigen::Map<const Matrix>(theta.data(), h, d);
  s.hidden_bias = theta.segment(h * d, h);
  s.output_weights = theta.segment(h * d + h, h);
  s.output_bias = theta[h * d + 2 * h];
}

LossGradient neural_loss_gradient(const NeuralState& s, const Matrix& standardized_x,
                                  std::span<const int> y, std::span<const double> w, double l2) {
  const Eigen::Index n = standardized_x.rows();
  const double total = std::accumulate(w.begin(), w.end(), 0.0);

  const Eigen::MatrixXd pre = (standardized_x * s.hidden_weights.transpose()).rowwise() +
                              s.hidden_bias.transpose();
  const Eigen::MatrixXd act = pre.array().tanh().matrix();
  const Vector z = (act * s.output_weights).array() + s.output_bias;

  LossGradient out;
  Vector dz(n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double omega = w[static_cast<std::size_t>(i)] / total;
    const int label = y[static_cast<std::size_t>(i)];
    loss += omega * (softplus(z[i]) - label * z[i]);
    dz[i] = omega * (sigmoid(z[i]) - label);
  }
  loss += 0.5 * l2 * (s.hidden_weights.squaredNorm() + s.output_weights.squaredNorm());

  const Vector g_out = act.transpose() * dz + l2 * s.output_weights;
  const double g_out_bias = dz.sum();
  const Eigen::MatrixXd d_act = dz * s.output_weights.transpose();
  const Eigen::MatrixXd d_pre = (d_act.array() * (1.0 - act.array().square())).matrix();
  const Matrix g_hidden = d_pre.transpose() * standardized_x + l2 * s.hidden_weights;
  const Vector g_hidden_bias = d_pre.colwise().sum().transpose();

  NeuralState grad = s;
  grad.hidden_weights = g_hidden;
  grad.hidden_bias = g_hidden_bias;
  grad.output_weights = g_out;
  grad.output_bias = g_out_bias;
  out.loss = loss;
  out.gradient = flatten(grad);
  return out;
}

// Full-batch Adam on the weighted cross-entropy.
NeuralState fit_neural(const Matrix& x, std::span<const int> y, std::span<const double> w,
                       const NeuralParams& params) {
  const Eigen::Index n = x.rows(), d = x.cols(), h = params.hidden_width;
  NeuralState s;
  s.input_mean = x.colwise().mean().transpose();
  s.input_scale.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var = (x.col(j).array() - s.input_mean[j]).square().mean();
    s.input_scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  Matrix xs(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    xs.row(i) = (x.row(i).transpose() - s.input_mean).cwiseQuotient(s.input_scale).transpose();
  }

  Rng rng(params.seed);
  const double r1 = std::sqrt(6.0 / static_cast<double>(d + h));
  const double r2 = std::sqrt(6.0 / static_cast<double>(h + 1));
  s.hidden_weights.resize(h, d);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) s.hidden_weights(i, j) = r1 * (2.0 * rng.uniform() - 1.0);
  }
  s.hidden_bias = Vector::Zero(h);
  s.output_weights.resize(h);
  for (Eigen::Index i = 0; i < h; ++i) s.output_weights[i] = r2 * (2.0 * rng.uniform() - 1.0);
  double tw = 0.0, twy = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    tw += w[i];
    twy += w[i] * y[i];
  }
  const double base = twy / tw;
  s.output_bias = std::log(base / (1.0 - base));

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Vector theta = flatten(s);
  Vector m = Vector::Zero(theta.size()), v = Vector::Zero(theta.size());
  double b1t = 1.0, b2t = 1.0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    const auto lg = neural_loss_gradient(s, xs, y, w, params.l2);
    m = kBeta1 * m + (1.0 - kBeta1) * lg.gradient;
    v = kBeta2 * v + (1.0 - kBeta2) * lg.gradient.cwiseProduct(lg.gradient);
    b1t *= kBeta1;
    b2t *= kBeta2;
    const Vector m_hat = m / (1.0 - b1t);
    const Vector v_hat = v / (1.0 - b2t);
    theta -= params.learning_rate * m_hat.cwiseQuotient((v_hat.array().sqrt() + kEps).matrix());
    unflatten(theta, s);
  }
  return s;
}

}  // namespace fairaudit::detail
