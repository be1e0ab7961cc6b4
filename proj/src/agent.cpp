#include "hha/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hha/numeric.hpp"

namespace hha {

void AgentConfig::validate() const {
    if (num_modes < 1) throw std::invalid_argument("AgentConfig: num_modes must be >= 1");
    if (refit_interval < 1) throw std::invalid_argument("AgentConfig: refit_interval must be >= 1");
    if (max_dwell_time < 1) throw std::invalid_argument("AgentConfig: max_dwell_time must be >= 1");
    if (!(control_prior_threshold > 0.0 && control_prior_threshold < 1.0)) {
        throw std::invalid_argument("AgentConfig: control_prior_threshold must be in (0, 1)");
    }
    bounds.validate();
}

Agent::Agent(const AgentConfig& cfg) : cfg_(cfg), rng_(derive_seed(cfg.seed, 0xA6E27)) {
    cfg_.validate();
    last_control_ = Eigen::VectorXd::Zero(cfg_.control_dim);
    current_target_ = Eigen::VectorXd();
}

void Agent::begin_episode(const Eigen::VectorXd& x0) {
    if (episode_open_) finalize_episode();
    ep_states_.assign(1, x0);
    ep_controls_.clear();
    ep_rewards_.clear();
    ep_targets_.clear();
    ep_modes_.clear();
    episode_open_ = true;
    episode_reward_ = 0.0;

    current_mode_ = -1;  // entering the first mode of the episode triggers a replan
    dwell_ = 0;
    policy_step_ = 0;
    commanded_action_ = -1;
    sojourn_start_mode_ = -1;
    active_policy_.reset();
    current_target_ = Eigen::VectorXd();
    last_control_ = Eigen::VectorXd::Zero(has_model_ ? params_.control_dim : cfg_.control_dim);
}

Eigen::MatrixXd Agent::subgoal_cost_matrix() const {
    const int K = params_.num_modes;
    Eigen::MatrixXd costs =
        Eigen::MatrixXd::Constant(K, K, std::numeric_limits<double>::infinity());
    for (const auto& [key, entry] : table_) {
        costs(key.first, key.second) = entry.expected_cost;
    }
    if (goal_mode_ >= 0 && goal_policy_ && goal_point_) {
        // staying in the goal mode is always actionable via the goal-point policy
        if (!std::isfinite(costs(goal_mode_, goal_mode_))) {
            costs(goal_mode_, goal_mode_) = 0.0;
        }
    }
    for (const auto& [s, a] : vetoes_) {
        costs(s, a) = std::numeric_limits<double>::infinity();
    }
    return costs;
}

void Agent::replan(int mode, const Eigen::VectorXd& x) {
    // close the completed sojourn in the transition counts
    if (commanded_action_ >= 0 && sojourn_start_mode_ >= 0) {
        planner::update(dirichlet_, sojourn_start_mode_, commanded_action_, mode);
    }

    const planner::PlanResult decision =
        planner::plan(mode, dirichlet_, goal_prior_, subgoal_cost_matrix(), cfg_.planner,
                      derive_seed(cfg_.seed, 0xB10C * (replan_count_++ + 1)));

    commanded_action_ = decision.action;
    sojourn_start_mode_ = mode;
    dwell_ = 0;
    policy_step_ = 0;
    active_policy_.reset();
    current_target_ = Eigen::VectorXd();

    if (mode == commanded_action_ && mode == goal_mode_ && goal_policy_) {
        // inside the lifted goal region: head for the continuous goal point
        active_policy_ = goal_policy_;
        current_target_ = *goal_point_;
        return;
    }
    const auto it = table_.find({mode, commanded_action_});
    if (it != table_.end()) {
        active_policy_ = it->second.policy;
        current_target_ = priors_[commanded_action_].point;
    } else {
        vetoes_.insert({mode, commanded_action_});
        events_.push_back("no cached policy for commanded pair (" + std::to_string(mode) + "," +
                          std::to_string(commanded_action_) + "); vetoed");
    }
}

Eigen::VectorXd Agent::act(const Eigen::VectorXd& x) {
    if (!episode_open_) throw std::logic_error("Agent::act: no open episode");

    AgentStepRecord record;
    record.step = global_step_ + 1;
    record.state = x;

    Eigen::VectorXd u;
    if (!has_model_) {
        u.resize(cfg_.control_dim);
        for (int i = 0; i < cfg_.control_dim; ++i) u[i] = rng_.uniform(-1.0, 1.0);
        record.mode = -1;
        record.replanned = false;
        record.action = -1;
    } else {
        const int mode = most_likely_mode(params_, x, last_control_);
        const bool switched = mode != current_mode_;
        const bool expired = dwell_ >= cfg_.max_dwell_time;
        const bool replanned = switched || expired || force_replan_;
        if (replanned) {
            if (force_replan_) {
                // model was rebuilt mid-sojourn: pending command is stale
                commanded_action_ = -1;
                sojourn_start_mode_ = -1;
                force_replan_ = false;
            }
            replan(mode, x);
        }
        current_mode_ = mode;

        if (active_policy_) {
            const int t = std::min(policy_step_, active_policy_->horizon() - 1);
            u = active_policy_->control(x, t).cwiseMax(-1.0).cwiseMin(1.0);
        } else {
            u = Eigen::VectorXd::Zero(params_.control_dim);
        }
        ++dwell_;
        ++policy_step_;
        record.mode = mode;
        record.replanned = replanned;
        record.action = commanded_action_;
    }

    record.control = u;
    pending_ = record;
    last_control_ = u;
    return u;
}

void Agent::observe(const Eigen::VectorXd& x_next, double reward, bool done) {
    if (!episode_open_ || !pending_) throw std::logic_error("Agent::observe: no pending action");

    ep_controls_.push_back(pending_->control);
    ep_rewards_.push_back(reward);
    ep_targets_.push_back(current_target_);
    ep_modes_.push_back(pending_->mode);
    ep_states_.push_back(x_next);

    ++global_step_;
    episode_reward_ += reward;

    pending_->reward = reward;
    log_.push_back(*pending_);
    pending_.reset();

    if (reward > cfg_.reward_preference_threshold) {
        goal_states_.push_back(x_next);
        if (has_model_) {
            set_goal(most_likely_mode(params_, x_next, last_control_), x_next);
        }
    }

    if (done) {
        best_episode_reward_ = std::max(best_episode_reward_, episode_reward_);
        finalize_episode();
    }
    maybe_refit(global_step_);
}

void Agent::finalize_episode() {
    if (!episode_open_) return;
    episode_open_ = false;
    if (ep_states_.size() < 2) return;  // nothing observed, drop

    EpisodeRecord record;
    record.traj.states = ep_states_;
    record.traj.controls = ep_controls_;
    record.traj.controls.push_back(Eigen::VectorXd::Zero(ep_controls_[0].size()));
    record.traj.rewards = ep_rewards_;
    record.traj.rewards.push_back(0.0);
    record.traj.modes = ep_modes_;
    record.traj.modes.push_back(ep_modes_.back());
    record.traj.refresh_switch_flags();
    record.targets = ep_targets_;
    record.targets.emplace_back();
    episodes_.push_back(std::move(record));

    ep_states_.clear();
    ep_controls_.clear();
    ep_rewards_.clear();
    ep_targets_.clear();
    ep_modes_.clear();
}

int Agent::lift_goal(const Eigen::VectorXd& goal_point) {
    if (!has_model_) throw std::logic_error("Agent::lift_goal: no fitted model yet");
    if (!cfg_.bounds.contains(goal_point)) {
        throw std::invalid_argument("Agent::lift_goal: goal point outside bounds");
    }
    const int mode =
        most_likely_mode(params_, goal_point, Eigen::VectorXd::Zero(params_.control_dim));
    set_goal(mode, goal_point);
    return mode;
}

void Agent::set_goal(int mode, const Eigen::VectorXd& point) {
    goal_mode_ = mode;
    goal_point_ = point;
    goal_prior_.log_preference[mode] = cfg_.goal_preference;

    LqrProblem problem;
    problem.A = params_.A[mode];
    problem.B = params_.B[mode];
    problem.b = params_.b[mode];
    problem.x_goal = point;
    const int M = params_.state_dim;
    problem.Q_f = cfg_.lqr.terminal_weight * Eigen::MatrixXd::Identity(M, M);
    problem.R = cfg_.lqr.control_weight *
                Eigen::MatrixXd::Identity(params_.control_dim, params_.control_dim);
    problem.horizon = cfg_.lqr.horizon;
    goal_policy_ = lqr::solve(problem);
}

bool Agent::maybe_refit(long global_step) {
    if (global_step <= 0 || global_step % cfg_.refit_interval != 0) return false;
    if (has_model_ && best_episode_reward_ >= cfg_.reward_refit_threshold) return false;

    // snapshot the buffer: finished episodes plus the in-progress one
    std::vector<Trajectory> dataset;
    std::vector<std::vector<Eigen::VectorXd>> dataset_targets;
    for (const EpisodeRecord& ep : episodes_) {
        dataset.push_back(ep.traj);
        dataset_targets.push_back(ep.targets);
    }
    if (episode_open_ && ep_states_.size() >= 2) {
        Trajectory partial;
        partial.states = ep_states_;
        partial.controls = ep_controls_;
        partial.controls.push_back(Eigen::VectorXd::Zero(ep_controls_[0].size()));
        partial.rewards = ep_rewards_;
        partial.rewards.push_back(0.0);
        dataset.push_back(std::move(partial));
        auto targets = ep_targets_;
        targets.emplace_back();
        dataset_targets.push_back(std::move(targets));
    }
    if (dataset.empty()) return false;

    FitOptions opts = cfg_.fit;
    opts.seed = derive_seed(cfg_.seed, 0xF17 + static_cast<std::uint64_t>(global_step));
    try {
        const FitResult result = fit(dataset, cfg_.num_modes, opts);
        if (result.active_modes < 2 && cfg_.num_modes >= 2) {
            events_.push_back("fit assigned fewer than 2 active modes");
        }
        rebuild_from_fit(result, dataset, dataset_targets);
        events_.push_back("refit at step " + std::to_string(global_step));
        return true;
    } catch (const std::exception& e) {
        events_.push_back(std::string("fit failed, previous model retained: ") + e.what());
        return false;
    }
}

void Agent::rebuild_from_fit(const FitResult& fit_result, const std::vector<Trajectory>& dataset,
                             const std::vector<std::vector<Eigen::VectorXd>>& dataset_targets) {
    params_ = fit_result.params;
    const int K = params_.num_modes;
    const int M = params_.state_dim;

    adjacency_ = extract_adjacency(params_, cfg_.bounds);

    // control priors, started from the labeled data centroid of each mode
    std::vector<Eigen::VectorXd> centroid(K, Eigen::VectorXd::Zero(M));
    std::vector<int> centroid_count(K, 0);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (std::size_t t = 0; t < dataset[i].states.size(); ++t) {
            const int k = fit_result.labels[i][t];
            centroid[k] += dataset[i].states[t];
            ++centroid_count[k];
        }
    }
    ControlPriorOptions prior_opts;
    prior_opts.threshold = cfg_.control_prior_threshold;
    priors_.clear();
    for (int k = 0; k < K; ++k) {
        const Eigen::VectorXd init = centroid_count[k] > 0
                                         ? Eigen::VectorXd(centroid[k] / centroid_count[k])
                                         : cfg_.bounds.center();
        priors_.push_back(control_prior(params_, k, cfg_.bounds, init, prior_opts));
    }

    // mode entry states observed under the new labels
    std::vector<std::vector<Eigen::VectorXd>> entries(K);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::vector<int>& labels = fit_result.labels[i];
        entries[labels[0]].push_back(dataset[i].states[0]);
        for (std::size_t t = 1; t < labels.size(); ++t) {
            if (labels[t] != labels[t - 1]) entries[labels[t]].push_back(dataset[i].states[t]);
        }
    }

    table_ = lqr::cache_policies(params_, adjacency_, priors_, cfg_.lqr, entries);

    // goal bookkeeping under the new mode identities
    goal_prior_ = planner::GoalPrior::uniform(K);
    goal_mode_ = -1;
    goal_point_.reset();
    goal_policy_.reset();
    if (!goal_states_.empty()) {
        const Eigen::VectorXd& point = goal_states_.back();
        set_goal(most_likely_mode(params_, point, Eigen::VectorXd::Zero(params_.control_dim)),
                 point);
    }

    // mode identities changed: re-count buffered sojourn transitions instead
    // of carrying old counts. A recorded command is translated by classifying
    // its target point; command-less sojourns credit the observed outcome.
    dirichlet_ = planner::init_priors(adjacency_);
    const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(params_.control_dim);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::vector<int>& labels = fit_result.labels[i];
        for (std::size_t t = 1; t < labels.size(); ++t) {
            if (labels[t] == labels[t - 1]) continue;
            const int s = labels[t - 1];
            const int s_next = labels[t];
            const Eigen::VectorXd& target = dataset_targets[i][t - 1];
            const int a = target.size() > 0 ? most_likely_mode(params_, target, zero_u) : s_next;
            planner::update(dirichlet_, s, a, s_next);
        }
    }

    vetoes_.clear();
    active_policy_.reset();
    current_target_ = Eigen::VectorXd();
    force_replan_ = true;
    current_mode_ = -1;
    if (last_control_.size() != params_.control_dim) {
        last_control_ = Eigen::VectorXd::Zero(params_.control_dim);
    }
    has_model_ = true;
    ++refit_count_;
}

ModelSnapshot Agent::snapshot() const {
    if (!has_model_) throw std::logic_error("Agent::snapshot: no fitted model yet");
    ModelSnapshot snap;
    snap.params = params_;
    snap.adjacency = adjacency_;
    snap.control_priors = priors_;
    snap.policies = table_;
    snap.dirichlet = dirichlet_;
    snap.goal_prior = goal_prior_;
    return snap;
}

}  // namespace hha
