#pragma once

#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hha/hybrid_model.hpp"
#include "hha/partition.hpp"

namespace hha {

struct LqrProblem {
    Eigen::MatrixXd A;       // M x M
    Eigen::MatrixXd B;       // M x N
    Eigen::VectorXd b;       // M affine offset
    Eigen::VectorXd x_goal;  // M target point
    Eigen::MatrixXd Q_f;     // M x M terminal weight, PSD
    Eigen::MatrixXd R;       // N x N control weight, PD
    int horizon = 50;        // S

    void validate() const;
};

// Time-indexed affine feedback u_t = -K_t x - k_t for t in [0, S).
struct LqrPolicy {
    std::vector<Eigen::MatrixXd> gains;    // S entries, N x M
    std::vector<Eigen::VectorXd> offsets;  // S entries, N
    Eigen::MatrixXd cost_to_go;            // (M+1) x (M+1) quadratic at t = 0 over [x; 1]
    std::vector<Eigen::MatrixXd> cost_to_go_schedule;  // S+1 entries, t = 0..S

    int horizon() const { return static_cast<int>(gains.size()); }
    Eigen::VectorXd control(const Eigen::VectorXd& x, int t) const;
    double expected_cost(const Eigen::VectorXd& x0) const;
};

namespace lqr {

// Exact minimizer of (x_S - g)' Q_f (x_S - g) + sum u_t' R u_t under the
// noiseless affine dynamics; backward Riccati pass on the constant-augmented
// state.
LqrPolicy solve(const LqrProblem& problem);

// Realized objective of the closed loop simulated for S steps from x0.
double rollout_cost(const LqrPolicy& policy, const LqrProblem& problem,
                    const Eigen::VectorXd& x0);

struct LqrConfig {
    double terminal_weight = 100.0;  // Q_f = terminal_weight * I
    double control_weight = 1.0;     // R = control_weight * I
    int horizon = 50;
};

struct PolicyEntry {
    LqrPolicy policy;
    double expected_cost = 0.0;  // J*_ij evaluated at the reference entry state
};

using PolicyTable = std::map<std::pair<int, int>, PolicyEntry>;

// One finite-horizon policy per adjacency-valid pair (i, j) whose target mode
// has an attained control prior: mode-i dynamics driven to prior point x_j.
// J*_ij is evaluated at the mean observed mode-i entry state when entry_states
// provides one, else at mode i's own prior point, else at the bounds center.
PolicyTable cache_policies(const HybridSystemParams& params, const AdjacencyMatrix& adjacency,
                           const std::vector<ControlPrior>& control_priors,
                           const LqrConfig& config,
                           const std::vector<std::vector<Eigen::VectorXd>>& entry_states = {});

}  // namespace lqr
}  // namespace hha
