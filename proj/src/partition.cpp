#include "hha/partition.hpp"

#include <cmath>
#include <stdexcept>

#include "hha/numeric.hpp"
#include "hha/simplex.hpp"

namespace hha {

void Bounds::validate() const {
    if (lower.size() != upper.size() || lower.size() == 0) {
        throw std::invalid_argument("Bounds: dimension mismatch");
    }
    if (!lower.allFinite() || !upper.allFinite()) {
        throw std::invalid_argument("Bounds: non-finite bound");
    }
    if (((upper - lower).array() <= 0.0).any()) {
        throw std::invalid_argument("Bounds: require lower < upper per dimension");
    }
}

Eigen::VectorXd Bounds::clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
}

bool Bounds::contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

AdjacencyMatrix AdjacencyMatrix::identity(int num_modes, const Bounds& bounds) {
    AdjacencyMatrix adj;
    adj.num_modes = num_modes;
    adj.bounds = bounds;
    adj.data.assign(static_cast<std::size_t>(num_modes) * num_modes, 0);
    for (int i = 0; i < num_modes; ++i) adj.set(i, i, true);
    return adj;
}

void AdjacencyMatrix::set(int i, int j, bool value) {
    data[i * num_modes + j] = value ? 1 : 0;
}

namespace {

// Feasibility of { x in bounds : v_i(x) = v_j(x), v_i(x) >= v_k(x) for all k }
// with logits v_k(x) = W_k x + r_k. Shifted to s = x - lower >= 0 for the
// standard-form solver.
bool shared_boundary_feasible(const HybridSystemParams& p, int i, int j, const Bounds& bounds,
                              bool* solver_failed) {
    const int M = p.state_dim;
    const int K = p.num_modes;

    const Eigen::VectorXd range = bounds.upper - bounds.lower;

    Eigen::MatrixXd A_eq(1, M);
    Eigen::VectorXd b_eq(1);
    const Eigen::RowVectorXd wij = p.W_x.row(i) - p.W_x.row(j);
    A_eq.row(0) = wij;
    b_eq[0] = (p.r[j] - p.r[i]) - wij.dot(bounds.lower);

    // dominance rows (as <=): (W_k - W_i) s <= r_i - r_k + (W_i - W_k) lower
    // plus upper-bound rows s <= range
    const int n_dom = K - 2 >= 0 ? K - 2 : 0;
    Eigen::MatrixXd A_ub(n_dom + M, M);
    Eigen::VectorXd b_ub(n_dom + M);
    int row = 0;
    for (int k = 0; k < K; ++k) {
        if (k == i || k == j) continue;
        const Eigen::RowVectorXd wki = p.W_x.row(k) - p.W_x.row(i);
        A_ub.row(row) = wki;
        b_ub[row] = (p.r[i] - p.r[k]) - wki.dot(bounds.lower);
        ++row;
    }
    A_ub.block(row, 0, M, M) = Eigen::MatrixXd::Identity(M, M);
    b_ub.segment(row, M) = range;

    const LpResult result =
        solve_lp(Eigen::VectorXd::Zero(M), A_eq, b_eq, A_ub, b_ub);
    if (result.status == LpStatus::Optimal) return true;
    if (result.status == LpStatus::Infeasible) return false;
    *solver_failed = true;  // conservative: treat as adjacent
    return true;
}

}  // namespace

AdjacencyMatrix extract_adjacency(const HybridSystemParams& params, const Bounds& bounds) {
    params.validate();
    bounds.validate();
    if (bounds.lower.size() != params.state_dim) {
        throw std::invalid_argument("extract_adjacency: bounds dimension mismatch");
    }

    AdjacencyMatrix adj = AdjacencyMatrix::identity(params.num_modes, bounds);
    for (int i = 0; i < params.num_modes; ++i) {
        for (int j = i + 1; j < params.num_modes; ++j) {
            bool failed = false;
            const bool touch = shared_boundary_feasible(params, i, j, bounds, &failed);
            adj.set(i, j, touch);
            adj.set(j, i, touch);
        }
    }
    return adj;
}

Eigen::VectorXd softmax_probability_gradient(const HybridSystemParams& params, int target_mode,
                                             const Eigen::VectorXd& x) {
    const Eigen::VectorXd u = Eigen::VectorXd::Zero(params.control_dim);
    const Eigen::VectorXd probs = mode_transition_probs(params, x, u);
    Eigen::VectorXd delta = -probs;
    delta[target_mode] += 1.0;
    return probs[target_mode] * (params.W_x.transpose() * delta);
}

ControlPrior control_prior(const HybridSystemParams& params, int target_mode,
                           const Bounds& bounds, const Eigen::VectorXd& init,
                           const ControlPriorOptions& opts) {
    bounds.validate();
    if (target_mode < 0 || target_mode >= params.num_modes) {
        throw std::invalid_argument("control_prior: invalid mode index");
    }
    if (!(opts.threshold > 0.0 && opts.threshold < 1.0)) {
        throw std::invalid_argument("control_prior: threshold must be in (0, 1)");
    }
    const Eigen::VectorXd u = Eigen::VectorXd::Zero(params.control_dim);

    ControlPrior prior;
    prior.mode = target_mode;

    Eigen::VectorXd x = bounds.clamp(init);
    prior.point = x;
    prior.attained_probability = mode_transition_probs(params, x, u)[target_mode];

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if (prior.attained_probability >= opts.threshold) {
            prior.attained = true;
            return prior;
        }
        x = bounds.clamp(x + opts.learning_rate * softmax_probability_gradient(params, target_mode, x));
        const double prob = mode_transition_probs(params, x, u)[target_mode];
        if (prob > prior.attained_probability) {
            prior.attained_probability = prob;
            prior.point = x;
        }
    }
    prior.attained = prior.attained_probability >= opts.threshold;
    return prior;
}

}  // namespace hha
