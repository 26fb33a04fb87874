#pragma once

// Fitting routines behind train(). Exposed for tests that check optimizer
// behaviour directly.

#include <span>
#include <vector>

#include "fairaudit/models.hpp"

namespace fairaudit::detail {

struct LogisticFit {
  LogisticState state;
  /// Objective value at every accepted iterate, starting from the zero model.
  std::vector<double> losses;
  bool converged = false;
};

/// Weights are normalised internally; the objective is the weighted mean
/// log-loss plus l2/2 * |coef|^2 (intercept unpenalised).
LogisticFit fit_logistic(const Matrix& x, std::span<const int> y, std::span<const double> w,
                         const LogisticParams& params);

ForestState fit_forest(const Matrix& x, std::span<const int> y, std::span<const double> w,
                       const ForestParams& params);

BoostedState fit_boosted(const Matrix& x, std::span<const int> y, std::span<const double> w,
                         const BoostedParams& params);

NeuralState fit_neural(const Matrix& x, std::span<const int> y, std::span<const double> w,
                       const NeuralParams& params);

double neural_forward(const NeuralState& s, std::span<const double> x);

/// Flattened layout: hidden_weights (row-major), hidden_bias, output_weights,
/// output_bias.
Vector flatten(const NeuralState& s);
void unflatten(const Vector& theta, NeuralState& s);

struct LossGradient {
  double loss = 0.0;
  Vector gradient;
};

/// Weighted mean cross-entropy plus l2/2 * (|W1|^2 + |w2|^2) on already
/// standardised inputs.
LossGradient neural_loss_gradient(const NeuralState& s, const Matrix& standardized_x,
                                  std::span<const int> y, std::span<const double> w, double l2);

/// Rescales weights to mean 1 over rows.
std::vector<double> normalized_weights(std::span<const double> w);

}  // namespace fairaudit::detail
