#include "hha/simplex.hpp"

#include <limits>
#include <stdexcept>

namespace hha {

namespace {
constexpr double kEps = 1e-9;
}

LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A_eq,
                  const Eigen::VectorXd& b_eq, const Eigen::MatrixXd& A_ub,
                  const Eigen::VectorXd& b_ub, int max_iters) {
    const int n = static_cast<int>(c.size());
    const int m1 = static_cast<int>(A_eq.rows());
    const int m2 = static_cast<int>(A_ub.rows());
    const int m = m1 + m2;

    LpResult result;
    if (m == 0) {
        // only nonnegativity: optimal at the origin unless some cost is negative
        result.status =
            (c.array() < 0.0).any() ? LpStatus::Unbounded : LpStatus::Optimal;
        result.x = Eigen::VectorXd::Zero(n);
        return result;
    }
    if ((m1 > 0 && A_eq.cols() != n) || (m2 > 0 && A_ub.cols() != n)) {
        throw std::invalid_argument("solve_lp: constraint matrix width mismatch");
    }

    // columns: n structural, m2 slack, m artificial, then RHS
    const int slack0 = n;
    const int art0 = n + m2;
    const int ncols = n + m2 + m;
    Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m + 1, ncols + 1);
    std::vector<int> basis(m);

    for (int i = 0; i < m1; ++i) {
        tab.row(i).head(n) = A_eq.row(i);
        tab(i, ncols) = b_eq[i];
    }
    for (int i = 0; i < m2; ++i) {
        tab.row(m1 + i).head(n) = A_ub.row(i);
        tab(m1 + i, slack0 + i) = 1.0;
        tab(m1 + i, ncols) = b_ub[i];
    }
    for (int i = 0; i < m; ++i) {
        if (tab(i, ncols) < 0.0) tab.row(i) *= -1.0;
        tab(i, art0 + i) = 1.0;
        basis[i] = art0 + i;
    }

    auto pivot = [&](int row, int col) {
        tab.row(row) /= tab(row, col);
        for (int i = 0; i <= m; ++i) {
            if (i != row && std::abs(tab(i, col)) > 0.0) {
                tab.row(i) -= tab(i, col) * tab.row(row);
            }
        }
        basis[row] = col;
    };

    int iters = 0;
    // Bland's rule in both phases
    auto run_phase = [&](int allowed_cols) -> LpStatus {
        while (true) {
            if (iters++ >= max_iters) return LpStatus::IterationLimit;
            int enter = -1;
            for (int j = 0; j < allowed_cols; ++j) {
                if (tab(m, j) < -kEps) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return LpStatus::Optimal;

            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                if (tab(i, enter) > kEps) {
                    const double ratio = tab(i, ncols) / tab(i, enter);
                    if (ratio < best_ratio - kEps ||
                        (ratio < best_ratio + kEps && (leave < 0 || basis[i] < basis[leave]))) {
                        best_ratio = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) return LpStatus::Unbounded;
            pivot(leave, enter);
        }
    };

    // phase 1: minimize the artificial total
    tab.row(m).setZero();
    for (int j = 0; j <= ncols; ++j) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += tab(i, j);
        tab(m, j) = (j >= art0 && j < ncols ? 1.0 : 0.0) - s;
    }
    LpStatus status = run_phase(ncols);
    if (status != LpStatus::Optimal) {
        result.status = status;
        return result;
    }
    const double art_total = -tab(m, ncols);
    if (art_total > 1e-7) {
        result.status = LpStatus::Infeasible;
        return result;
    }

    // drive any artificial still basic (at zero level) out of the basis
    for (int i = 0; i < m; ++i) {
        if (basis[i] >= art0) {
            int col = -1;
            for (int j = 0; j < art0; ++j) {
                if (std::abs(tab(i, j)) > kEps) {
                    col = j;
                    break;
                }
            }
            if (col >= 0) pivot(i, col);
            // otherwise the row is redundant; the artificial stays basic at zero
        }
    }

    // phase 2: real objective, artificial columns barred from entering
    tab.row(m).setZero();
    tab.row(m).head(n) = c.transpose();
    for (int i = 0; i < m; ++i) {
        const int j = basis[i];
        const double cost = j < n ? c[j] : 0.0;
        if (cost != 0.0) tab.row(m) -= cost * tab.row(i);
    }
    status = run_phase(art0);
    if (status != LpStatus::Optimal) {
        result.status = status;
        return result;
    }

    result.status = LpStatus::Optimal;
    result.x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n) result.x[basis[i]] = tab(i, ncols);
    }
    result.objective = c.dot(result.x);
    return result;
}

}  // namespace hha
