#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "hha/partition.hpp"

namespace hha::planner {

// Dirichlet pseudo-counts over (action, state, next-state). Actions are
// target modes, so all three axes have length K.
struct DirichletTransitionModel {
    int num_modes = 0;
    std::vector<double> alpha;  // [a][s][s'] row-major

    double& at(int a, int s, int s_next);
    double at(int a, int s, int s_next) const;

    // row alpha_{as} as a vector over next states
    Eigen::VectorXd counts(int s, int a) const;
    // predictive mean alpha / sum(alpha)
    Eigen::VectorXd predictive(int s, int a) const;
};

// log preferences over modes; the exponentiated vector acts as an
// unnormalized prior over rewarding states
struct GoalPrior {
    Eigen::VectorXd log_preference;

    static GoalPrior uniform(int num_modes);
};

// 0.9 pseudo-counts on adjacency-valid transitions, a small floor elsewhere
DirichletTransitionModel init_priors(const AdjacencyMatrix& adjacency, double valid_count = 0.9,
                                     double floor = 1e-6);

void update(DirichletTransitionModel& model, int s, int a, int s_next);

// KL divergence between Dirichlet distributions with the given parameters
double dirichlet_kl(const Eigen::VectorXd& alpha_post, const Eigen::VectorXd& alpha_prior);

// expected posterior-vs-prior KL after one more observation of (s, a),
// averaged under the predictive distribution
double expected_info_gain(const DirichletTransitionModel& model, int s, int a);

// Shannon entropy of the predictive next-state distribution in nats
double state_entropy_bonus(const Eigen::VectorXd& predictive);

struct PlannerConfig {
    int horizon = 3;                    // T
    int mc_rollouts = 32;               // Monte Carlo rollouts per sequence; also the
                                        // number of sampled sequences above the cap
    int enumeration_cap = 4096;         // exhaustive enumeration while K^T fits
    double subgoal_cost_weight = 0.01;  // lambda_c on J*
    double param_gain_weight = 1.0;     // beta_p
    double entropy_weight = 1.0;        // beta_s
    double infeasible_cost = 1e9;       // stands in for the +inf J* sentinel
};

struct PlanResult {
    int action = 0;
    double score = 0.0;
    bool actionable = true;  // false: every subgoal cost from s0 infinite, stay in place
    // per-term mean breakdown of the chosen sequence
    double goal_term = 0.0;
    double cost_term = 0.0;
    double info_gain_term = 0.0;
    double entropy_term = 0.0;
};

// Receding-horizon selection: scores open-loop action sequences by Monte
// Carlo rollouts through the predictive model, maximizing goal preference
// plus information bonuses minus weighted subgoal costs; returns the first
// action of the best sequence. subgoal_costs(i, j) may be +inf.
PlanResult plan(int s0, const DirichletTransitionModel& model, const GoalPrior& goal_prior,
                const Eigen::MatrixXd& subgoal_costs, const PlannerConfig& config,
                std::uint64_t seed);

}  // namespace hha::planner
