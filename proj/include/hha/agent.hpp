#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hha/hybrid_model.hpp"
#include "hha/lqr.hpp"
#include "hha/partition.hpp"
#include "hha/planner.hpp"
#include "hha/rng.hpp"
#include "hha/serialize.hpp"

namespace hha {

struct AgentConfig {
    int num_modes = 5;                 // fit target K
    int control_dim = 1;               // N, needed before the first fit
    int refit_interval = 1000;         // environment steps between refits
    double reward_refit_threshold = 90.0;  // stop refitting once an episode reaches this
    int max_dwell_time = 50;           // forced replan after this many steps in one mode
    double control_prior_threshold = 0.7;
    double goal_preference = 5.0;      // ln p~ assigned to rewarding modes
    double reward_preference_threshold = 1.0;  // env reward above this marks a mode rewarding
    Bounds bounds;
    lqr::LqrConfig lqr;
    planner::PlannerConfig planner;
    FitOptions fit;
    std::uint64_t seed = 0;

    void validate() const;
};

// One per-step event-log row.
struct AgentStepRecord {
    long step = 0;
    Eigen::VectorXd state;
    Eigen::VectorXd control;
    int mode = -1;       // -1 while acting randomly before the first fit
    bool replanned = false;
    int action = -1;     // commanded target mode
    double reward = 0.0;
};

// The hierarchical control loop: classifies the current mode, replans on mode
// switches and dwell-time expirations, dispatches the commanded transition to
// a cached LQR policy, counts sojourn outcomes, and refits the hybrid model on
// a fixed cadence. Acts with seeded random controls until the first fit.
class Agent {
public:
    explicit Agent(const AgentConfig& cfg);

    void begin_episode(const Eigen::VectorXd& x0);

    // control for the current observation, clipped to [-1, 1] per dimension
    Eigen::VectorXd act(const Eigen::VectorXd& x);

    // step outcome feedback; runs the refit cadence internally
    void observe(const Eigen::VectorXd& x_next, double reward, bool done);

    // classify a continuous goal point and place goal preference on its mode
    int lift_goal(const Eigen::VectorXd& goal_point);

    // refit + rebuild of partition, priors, policies, and Dirichlet counts
    // when the cadence and reward guard allow it; returns true if refit ran
    bool maybe_refit(long global_step);

    bool has_model() const { return has_model_; }
    const HybridSystemParams& params() const { return params_; }
    const AdjacencyMatrix& adjacency() const { return adjacency_; }
    const std::vector<ControlPrior>& control_priors() const { return priors_; }
    const lqr::PolicyTable& policy_table() const { return table_; }
    const planner::DirichletTransitionModel& dirichlet() const { return dirichlet_; }
    const planner::GoalPrior& goal_prior() const { return goal_prior_; }
    int current_mode() const { return current_mode_; }
    long global_step() const { return global_step_; }
    double best_episode_reward() const { return best_episode_reward_; }
    int goal_mode() const { return goal_mode_; }

    const std::vector<AgentStepRecord>& log() const { return log_; }
    void clear_log() { log_.clear(); }
    const std::vector<std::string>& events() const { return events_; }
    long refit_count() const { return refit_count_; }

    // current model state packaged for persistence; requires a fitted model
    ModelSnapshot snapshot() const;

    // J* matrix the planner sees: +inf for absent or vetoed pairs
    Eigen::MatrixXd subgoal_cost_matrix() const;

private:
    struct EpisodeRecord {
        Trajectory traj;
        std::vector<Eigen::VectorXd> targets;  // commanded target point per step; empty = none
    };

    void finalize_episode();
    void rebuild_from_fit(const FitResult& fit_result,
                          const std::vector<Trajectory>& dataset,
                          const std::vector<std::vector<Eigen::VectorXd>>& dataset_targets);
    void set_goal(int mode, const Eigen::VectorXd& point);
    void replan(int mode, const Eigen::VectorXd& x);

    AgentConfig cfg_;
    Rng rng_;

    bool has_model_ = false;
    HybridSystemParams params_;
    AdjacencyMatrix adjacency_;
    std::vector<ControlPrior> priors_;
    lqr::PolicyTable table_;
    planner::DirichletTransitionModel dirichlet_;
    planner::GoalPrior goal_prior_;

    int goal_mode_ = -1;
    std::optional<Eigen::VectorXd> goal_point_;
    std::optional<LqrPolicy> goal_policy_;
    std::vector<Eigen::VectorXd> goal_states_;  // raw states where reward was found

    std::vector<EpisodeRecord> episodes_;
    std::vector<Eigen::VectorXd> ep_states_, ep_controls_, ep_targets_;
    std::vector<double> ep_rewards_;
    std::vector<int> ep_modes_;
    bool episode_open_ = false;

    int current_mode_ = -1;
    int dwell_ = 0;
    int policy_step_ = 0;
    int commanded_action_ = -1;
    int sojourn_start_mode_ = -1;
    std::optional<LqrPolicy> active_policy_;
    Eigen::VectorXd current_target_;  // empty = none
    std::set<std::pair<int, int>> vetoes_;
    bool force_replan_ = false;

    Eigen::VectorXd last_control_;
    long global_step_ = 0;
    long replan_count_ = 0;
    double episode_reward_ = 0.0;
    double best_episode_reward_ = -std::numeric_limits<double>::infinity();

    std::optional<AgentStepRecord> pending_;
    std::vector<AgentStepRecord> log_;
    std::vector<std::string> events_;
    long refit_count_ = 0;
};

}  // namespace hha
