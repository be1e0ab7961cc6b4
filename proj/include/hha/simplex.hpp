#pragma once

#include <Eigen/Dense>

namespace hha {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
    LpStatus status = LpStatus::IterationLimit;
    Eigen::VectorXd x;
    double objective = 0.0;
};

// Dense two-phase simplex for small problems:
//   min c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0
// Bland's rule, so it terminates on any instance.
LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A_eq,
                  const Eigen::VectorXd& b_eq, const Eigen::MatrixXd& A_ub,
                  const Eigen::VectorXd& b_ub, int max_iters = 10000);

}  // namespace hha
