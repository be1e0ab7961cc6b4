#include "hha/lqr.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hha {

void LqrProblem::validate() const {
    const auto M = A.rows();
    const auto N = B.cols();
    if (M < 1 || A.cols() != M || B.rows() != M || b.size() != M || x_goal.size() != M) {
        throw std::invalid_argument("LqrProblem: dynamics dimension mismatch");
    }
    if (Q_f.rows() != M || Q_f.cols() != M || R.rows() != N || R.cols() != N) {
        throw std::invalid_argument("LqrProblem: cost dimension mismatch");
    }
    if (!Q_f.isApprox(Q_f.transpose(), 1e-9) || !R.isApprox(R.transpose(), 1e-9)) {
        throw std::invalid_argument("LqrProblem: cost matrices must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qf_eig(Q_f);
    if (qf_eig.eigenvalues().minCoeff() < -1e-9) {
        throw std::invalid_argument("LqrProblem: Q_f must be positive semidefinite");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> r_eig(R);
    if (r_eig.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument("LqrProblem: R must be positive definite");
    }
    if (horizon < 1) throw std::invalid_argument("LqrProblem: horizon must be >= 1");
}

Eigen::VectorXd LqrPolicy::control(const Eigen::VectorXd& x, int t) const {
    return -(gains[t] * x) - offsets[t];
}

double LqrPolicy::expected_cost(const Eigen::VectorXd& x0) const {
    Eigen::VectorXd aug(x0.size() + 1);
    aug.head(x0.size()) = x0;
    aug[x0.size()] = 1.0;
    return aug.dot(cost_to_go * aug);
}

namespace lqr {

LqrPolicy solve(const LqrProblem& problem) {
    problem.validate();
    const int M = static_cast<int>(problem.A.rows());
    const int N = static_cast<int>(problem.B.cols());
    const int S = problem.horizon;

    // constant-augmented state absorbs the affine offset and the goal shift
    Eigen::MatrixXd A_aug = Eigen::MatrixXd::Zero(M + 1, M + 1);
    A_aug.topLeftCorner(M, M) = problem.A;
    A_aug.topRightCorner(M, 1) = problem.b;
    A_aug(M, M) = 1.0;

    Eigen::MatrixXd B_aug = Eigen::MatrixXd::Zero(M + 1, N);
    B_aug.topRows(M) = problem.B;

    Eigen::MatrixXd Qf_aug = Eigen::MatrixXd::Zero(M + 1, M + 1);
    Qf_aug.topLeftCorner(M, M) = problem.Q_f;
    Qf_aug.topRightCorner(M, 1) = -problem.Q_f * problem.x_goal;
    Qf_aug.bottomLeftCorner(1, M) = (-problem.Q_f * problem.x_goal).transpose();
    Qf_aug(M, M) = problem.x_goal.dot(problem.Q_f * problem.x_goal);

    LqrPolicy policy;
    policy.gains.assign(S, Eigen::MatrixXd());
    policy.offsets.assign(S, Eigen::VectorXd());

    Eigen::MatrixXd P = Qf_aug;
    for (int t = S - 1; t >= 0; --t) {
        const Eigen::MatrixXd H = problem.R + B_aug.transpose() * P * B_aug;
        const Eigen::LDLT<Eigen::MatrixXd> H_ldlt(H);
        if (H_ldlt.info() != Eigen::Success || !H_ldlt.isPositive() ||
            H_ldlt.vectorD().minCoeff() <= 0.0) {
            throw std::domain_error("lqr::solve: R + B'PB singular at step " + std::to_string(t));
        }
        const Eigen::MatrixXd K_aug = H_ldlt.solve(B_aug.transpose() * P * A_aug);  // N x (M+1)
        P = A_aug.transpose() * P * (A_aug - B_aug * K_aug);
        P = 0.5 * (P + P.transpose());

        policy.gains[t] = K_aug.leftCols(M);
        policy.offsets[t] = K_aug.col(M);
    }
    policy.cost_to_go = P;
    return policy;
}

double rollout_cost(const LqrPolicy& policy, const LqrProblem& problem,
                    const Eigen::VectorXd& x0) {
    if (policy.horizon() != problem.horizon) {
        throw std::invalid_argument("lqr::rollout_cost: policy/problem horizon mismatch");
    }
    Eigen::VectorXd x = x0;
    double cost = 0.0;
    for (int t = 0; t < problem.horizon; ++t) {
        const Eigen::VectorXd u = policy.control(x, t);
        cost += u.dot(problem.R * u);
        x = problem.A * x + problem.B * u + problem.b;
    }
    const Eigen::VectorXd dev = x - problem.x_goal;
    cost += dev.dot(problem.Q_f * dev);
    return cost;
}

PolicyTable cache_policies(const HybridSystemParams& params, const AdjacencyMatrix& adjacency,
                           const std::vector<ControlPrior>& control_priors,
                           const LqrConfig& config,
                           const std::vector<std::vector<Eigen::VectorXd>>& entry_states) {
    params.validate();
    if (adjacency.num_modes != params.num_modes) {
        throw std::invalid_argument("cache_policies: adjacency/params mode count mismatch");
    }
    const int M = params.state_dim;
    const int N = params.control_dim;
    const int K = params.num_modes;

    std::vector<const ControlPrior*> prior_of(K, nullptr);
    for (const ControlPrior& prior : control_priors) {
        if (prior.mode >= 0 && prior.mode < K && prior.attained) {
            prior_of[prior.mode] = &prior;
        }
    }

    // reference entry state per source mode: mean observed entry, else the
    // mode's own prior point, else the bounds center
    std::vector<Eigen::VectorXd> reference(K);
    for (int i = 0; i < K; ++i) {
        if (i < static_cast<int>(entry_states.size()) && !entry_states[i].empty()) {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(M);
            for (const auto& x : entry_states[i]) mean += x;
            reference[i] = mean / static_cast<double>(entry_states[i].size());
        } else if (prior_of[i]) {
            reference[i] = prior_of[i]->point;
        } else {
            reference[i] = adjacency.bounds.center();
        }
    }

    PolicyTable table;
    for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
            if (!adjacency.adjacent(i, j)) continue;
            if (!prior_of[j]) continue;  // target mode unreachable as a subgoal

            LqrProblem problem;
            problem.A = params.A[i];
            problem.B = params.B[i];
            problem.b = params.b[i];
            problem.x_goal = prior_of[j]->point;
            problem.Q_f = config.terminal_weight * Eigen::MatrixXd::Identity(M, M);
            problem.R = config.control_weight * Eigen::MatrixXd::Identity(N, N);
            problem.horizon = config.horizon;

            PolicyEntry entry;
            entry.policy = solve(problem);
            entry.expected_cost = entry.policy.expected_cost(reference[i]);
            table.emplace(std::make_pair(i, j), std::move(entry));
        }
    }
    return table;
}

}  // namespace lqr
}  // namespace hha
