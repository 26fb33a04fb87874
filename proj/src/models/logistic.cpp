#include <numeric>

#include "fairaudit/detail/learners.hpp"

namespace fairaudit::detail {

std::vector<double> normalized_weights(std::span<const double> w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  const double scale = static_cast<double>(w.size()) / total;
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] * scale;
  return out;
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct Objective {
  const Matrix& x;
  std::span<const int> y;
  Vector w;  // sums to 1
  double l2;

  double loss(const Vector& coef, double intercept) const {
    const Vector z = (x * coef).array() + intercept;
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      total += w[i] * (softplus(z[i]) - y[static_cast<std::size_t>(i)] * z[i]);
    }
    return total + 0.5 * l2 * coef.squaredNorm();
  }
};

}  // namespace

// Damped Newton iterations with Armijo backtracking: every accepted step
// strictly lowers the objective.
LogisticFit fit_logistic(const Matrix& x, std::span<const int> y, std::span<const double> w,
                         const LogisticParams& params) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Objective obj{x, y, Vector(n), params.l2};
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) obj.w[i] = w[static_cast<std::size_t>(i)] / total;

  LogisticFit fit;
  Vector coef = Vector::Zero(d);
  double intercept = 0.0;
  double current = obj.loss(coef, intercept);
  fit.losses.push_back(current);

  Matrix design(n, d + 1);
  design.leftCols(d) = x;
  design.col(d).setOnes();

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    const Vector z = (x * coef).array() + intercept;
    Vector residual(n), curvature(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(z[i]);
      residual[i] = obj.w[i] * (p - y[static_cast<std::size_t>(i)]);
      curvature[i] = obj.w[i] * p * (1.0 - p);
    }
    Vector grad = design.transpose() * residual;
    grad.head(d) += params.l2 * coef;
    if (grad.lpNorm<Eigen::Infinity>() <= params.tolerance) {
      fit.converged = true;
      break;
    }

    Eigen::MatrixXd hessian = design.transpose() * curvature.asDiagonal() * design;
    hessian.diagonal().head(d).array() += params.l2;
    // Keeps the system positive definite when a column is constant.
    hessian.diagonal().array() += 1e-12;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    Vector step = ldlt.info() == Eigen::Success ? Vector(-ldlt.solve(grad)) : Vector(-grad);
    double slope = grad.dot(step);
    if (!(slope < 0.0)) {
      step = -grad;
      slope = -grad.squaredNorm();
    }

    double t = 1.0;
    bool accepted = false;
    while (t > 1e-14) {
      const Vector cand = coef + t * step.head(d);
      const double cand_b = intercept + t * step[d];
      const double value = obj.loss(cand, cand_b);
      if (value <= current + 1e-4 * t * slope) {
        coef = cand;
        intercept = cand_b;
        accepted = true;
        current = value;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No further decrease is representable.
      fit.converged = true;
      break;
    }
    fit.losses.push_back(current);
  }
  fit.state.coef = coef;
  fit.state.intercept = intercept;
  return fit;
}

}  // namespace fairaudit::detail
