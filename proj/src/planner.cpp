#include "hha/planner.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hha/numeric.hpp"
#include "hha/rng.hpp"

namespace hha::planner {

double& DirichletTransitionModel::at(int a, int s, int s_next) {
    return alpha[(a * num_modes + s) * num_modes + s_next];
}

double DirichletTransitionModel::at(int a, int s, int s_next) const {
    return alpha[(a * num_modes + s) * num_modes + s_next];
}

Eigen::VectorXd DirichletTransitionModel::counts(int s, int a) const {
    Eigen::VectorXd row(num_modes);
    for (int k = 0; k < num_modes; ++k) row[k] = at(a, s, k);
    return row;
}

Eigen::VectorXd DirichletTransitionModel::predictive(int s, int a) const {
    Eigen::VectorXd row = counts(s, a);
    return row / row.sum();
}

GoalPrior GoalPrior::uniform(int num_modes) {
    return GoalPrior{Eigen::VectorXd::Zero(num_modes)};
}

DirichletTransitionModel init_priors(const AdjacencyMatrix& adjacency, double valid_count,
                                     double floor) {
    const int K = adjacency.num_modes;
    DirichletTransitionModel model;
    model.num_modes = K;
    model.alpha.assign(static_cast<std::size_t>(K) * K * K, floor);
    for (int a = 0; a < K; ++a) {
        for (int s = 0; s < K; ++s) {
            for (int s2 = 0; s2 < K; ++s2) {
                if (adjacency.adjacent(s, s2)) model.at(a, s, s2) = valid_count;
            }
        }
    }
    return model;
}

void update(DirichletTransitionModel& model, int s, int a, int s_next) {
    if (s < 0 || s >= model.num_modes || a < 0 || a >= model.num_modes || s_next < 0 ||
        s_next >= model.num_modes) {
        throw std::invalid_argument("planner::update: index out of range");
    }
    model.at(a, s, s_next) += 1.0;
}

double dirichlet_kl(const Eigen::VectorXd& alpha_post, const Eigen::VectorXd& alpha_prior) {
    if (alpha_post.size() != alpha_prior.size() || alpha_post.size() == 0) {
        throw std::invalid_argument("dirichlet_kl: dimension mismatch");
    }
    if ((alpha_post.array() <= 0.0).any() || (alpha_prior.array() <= 0.0).any()) {
        throw std::domain_error("dirichlet_kl: parameters must be positive");
    }
    const double sum_post = alpha_post.sum();
    const double sum_prior = alpha_prior.sum();
    double kl = std::lgamma(sum_post) - std::lgamma(sum_prior);
    const double psi_sum = digamma(sum_post);
    for (int i = 0; i < alpha_post.size(); ++i) {
        kl += std::lgamma(alpha_prior[i]) - std::lgamma(alpha_post[i]);
        kl += (alpha_post[i] - alpha_prior[i]) * (digamma(alpha_post[i]) - psi_sum);
    }
    return kl;
}

double expected_info_gain(const DirichletTransitionModel& model, int s, int a) {
    const Eigen::VectorXd prior = model.counts(s, a);
    const Eigen::VectorXd predictive = prior / prior.sum();
    double gain = 0.0;
    for (int s2 = 0; s2 < model.num_modes; ++s2) {
        Eigen::VectorXd post = prior;
        post[s2] += 1.0;
        gain += predictive[s2] * dirichlet_kl(post, prior);
    }
    return gain;
}

double state_entropy_bonus(const Eigen::VectorXd& predictive) {
    return entropy(predictive);
}

namespace {

struct StepTerms {
    double cost = 0.0;      // -lambda_c * J*
    double info_gain = 0.0; // beta_p * IG_p
    double entropy = 0.0;   // beta_s * H
};

}  // namespace

PlanResult plan(int s0, const DirichletTransitionModel& model, const GoalPrior& goal_prior,
                const Eigen::MatrixXd& subgoal_costs, const PlannerConfig& config,
                std::uint64_t seed) {
    const int K = model.num_modes;
    if (s0 < 0 || s0 >= K) throw std::invalid_argument("plan: state out of range");
    if (goal_prior.log_preference.size() != K || subgoal_costs.rows() != K ||
        subgoal_costs.cols() != K) {
        throw std::invalid_argument("plan: goal prior / cost table dimension mismatch");
    }
    if (config.horizon < 1) throw std::invalid_argument("plan: horizon must be >= 1");

    PlanResult result;
    bool any_actionable = false;
    for (int a = 0; a < K; ++a) {
        if (std::isfinite(subgoal_costs(s0, a))) any_actionable = true;
    }
    if (!any_actionable) {
        result.action = s0;
        result.actionable = false;
        result.score = -std::numeric_limits<double>::infinity();
        return result;
    }

    // per-(s, a) deterministic terms, memoized across rollouts
    std::vector<StepTerms> terms(static_cast<std::size_t>(K) * K);
    std::vector<bool> have_terms(terms.size(), false);
    std::vector<Eigen::VectorXd> predictive(terms.size());
    auto step_terms = [&](int s, int a) -> const StepTerms& {
        const std::size_t idx = static_cast<std::size_t>(s) * K + a;
        if (!have_terms[idx]) {
            StepTerms t;
            const double cost = subgoal_costs(s, a);
            t.cost = -config.subgoal_cost_weight *
                     (std::isfinite(cost) ? cost : config.infeasible_cost);
            if (config.param_gain_weight != 0.0) {
                t.info_gain = config.param_gain_weight * expected_info_gain(model, s, a);
            }
            predictive[idx] = model.predictive(s, a);
            if (config.entropy_weight != 0.0) {
                t.entropy = config.entropy_weight * state_entropy_bonus(predictive[idx]);
            }
            terms[idx] = t;
            have_terms[idx] = true;
        }
        return terms[idx];
    };
    auto predictive_row = [&](int s, int a) -> const Eigen::VectorXd& {
        step_terms(s, a);
        return predictive[static_cast<std::size_t>(s) * K + a];
    };

    // candidate open-loop sequences
    const int T = config.horizon;
    double space = 1.0;
    for (int t = 0; t < T; ++t) space *= K;
    const bool enumerate_all = space <= static_cast<double>(config.enumeration_cap);
    const int n_sequences = enumerate_all ? static_cast<int>(space) : config.mc_rollouts;

    std::vector<int> sequence(T);
    double best_score = -std::numeric_limits<double>::infinity();
    Rng sampler(derive_seed(seed, 0x5eed));

    for (int seq_idx = 0; seq_idx < n_sequences; ++seq_idx) {
        if (enumerate_all) {
            int rem = seq_idx;
            for (int t = 0; t < T; ++t) {
                sequence[t] = rem % K;
                rem /= K;
            }
        } else {
            for (int t = 0; t < T; ++t) sequence[t] = sampler.uniform_int(K);
        }

        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(seq_idx) + 1));
        double goal_sum = 0.0, cost_sum = 0.0, ig_sum = 0.0, ent_sum = 0.0;
        for (int rollout = 0; rollout < config.mc_rollouts; ++rollout) {
            int s = s0;
            for (int t = 0; t < T; ++t) {
                const int a = sequence[t];
                const StepTerms& st = step_terms(s, a);
                cost_sum += st.cost;
                ig_sum += st.info_gain;
                ent_sum += st.entropy;
                s = rng.categorical(predictive_row(s, a));
                goal_sum += goal_prior.log_preference[s];
            }
        }
        const double inv = 1.0 / static_cast<double>(config.mc_rollouts);
        const double score = (goal_sum + cost_sum + ig_sum + ent_sum) * inv;
        if (score > best_score) {
            best_score = score;
            result.action = sequence[0];
            result.score = score;
            result.goal_term = goal_sum * inv;
            result.cost_term = cost_sum * inv;
            result.info_gain_term = ig_sum * inv;
            result.entropy_term = ent_sum * inv;
        }
    }
    return result;
}

}  // namespace hha::planner
