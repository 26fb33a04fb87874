#pragma once

#include <optional>
#include <vector>

#include "fairaudit/common.hpp"

namespace fairaudit::detail {

/// Dense two-phase simplex with Bland's rule for
///   minimise c.x  subject to  a_ub x <= b_ub,  a_eq x = b_eq,  x >= 0.
/// Returns nullopt when the program is infeasible or unbounded.
std::optional<Vector> solve_linear_program(const Vector& c, const Eigen::MatrixXd& a_ub,
                                           const Vector& b_ub, const Eigen::MatrixXd& a_eq,
                                           const Vector& b_eq);

}  // namespace fairaudit::detail
