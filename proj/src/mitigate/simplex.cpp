#include "fairaudit/detail/simplex.hpp"

namespace fairaudit::detail {

namespace {

constexpr double kTol = 1e-11;

struct Tableau {
  Eigen::MatrixXd t;  // rows: constraints then objective; last column: rhs
  std::vector<Eigen::Index> basis;

  Eigen::Index rows() const { return t.rows() - 1; }
  Eigen::Index cols() const { return t.cols() - 1; }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t.row(r) /= t(r, c);
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      if (i != r && t(i, c) != 0.0) t.row(i) -= t(i, c) * t.row(r);
    }
    basis[static_cast<std::size_t>(r)] = c;
  }

  // Minimises the objective row; columns >= allowed are never entered.
  bool optimise(Eigen::Index allowed) {
    for (int guard = 0; guard < 100000; ++guard) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        if (t(rows(), j) < -kTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < rows(); ++i) {
        if (t(i, enter) > kTol) {
          const double ratio = t(i, cols()) / t(i, enter);
          if (leave < 0 || ratio < best - kTol ||
              (ratio <= best + kTol && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
            leave = i;
            best = ratio;
          }
        }
      }
      if (leave < 0) return false;  // unbounded
      pivot(leave, enter);
    }
    return false;
  }
};

}  // namespace

std::optional<Vector> solve_linear_program(const Vector& c, const Eigen::MatrixXd& a_ub,
                                           const Vector& b_ub, const Eigen::MatrixXd& a_eq,
                                           const Vector& b_eq) {
  const Eigen::Index n = c.size();
  const Eigen::Index m_ub = a_ub.rows(), m_eq = a_eq.rows();
  const Eigen::Index m = m_ub + m_eq;
  // Columns: x (n), slacks (m_ub), artificials (m), rhs.
  const Eigen::Index n_total = n + m_ub + m;
  Tableau tab;
  tab.t = Eigen::MatrixXd::Zero(m + 1, n_total + 1);
  tab.basis.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool ub = i < m_ub;
    Eigen::RowVectorXd row = ub ? Eigen::RowVectorXd(a_ub.row(i)) : Eigen::RowVectorXd(a_eq.row(i - m_ub));
    double rhs = ub ? b_ub[i] : b_eq[i - m_ub];
    double slack = ub ? 1.0 : 0.0;
    if (rhs < 0) {
      row = -row;
      rhs = -rhs;
      slack = -slack;
    }
    tab.t.block(i, 0, 1, n) = row;
    if (ub) tab.t(i, n + i) = slack;
    tab.t(i, n + m_ub + i) = 1.0;
    tab.t(i, n_total) = rhs;
    tab.basis[static_cast<std::size_t>(i)] = n + m_ub + i;
  }
  // Phase 1: minimise the sum of artificials.
  for (Eigen::Index i = 0; i < m; ++i) tab.t.row(m) -= tab.t.row(i);
  if (!tab.optimise(n + m_ub)) return std::nullopt;
  if (-tab.t(m, n_total) > 1e-9) return std::nullopt;  // infeasible
  // Drive remaining artificials out of the basis where possible.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (tab.basis[static_cast<std::size_t>(i)] >= n + m_ub) {
      for (Eigen::Index j = 0; j < n + m_ub; ++j) {
        if (std::abs(tab.t(i, j)) > kTol) {
          tab.pivot(i, j);
          break;
        }
      }
    }
  }
  // Phase 2.
  tab.t.row(m).setZero();
  tab.t.block(m, 0, 1, n) = c.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index b = tab.basis[static_cast<std::size_t>(i)];
    if (b < n + m_ub && tab.t(m, b) != 0.0) tab.t.row(m) -= tab.t(m, b) * tab.t.row(i);
  }
  if (!tab.optimise(n + m_ub)) return std::nullopt;
  Vector x = Vector::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index b = tab.basis[static_cast<std::size_t>(i)];
    if (b < n) x[b] = tab.t(i, n_total);
  }
  return x;
}

}  // namespace fairaudit::detail
