#include "hha/hybrid_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hha/numeric.hpp"
#include "hha/rng.hpp"

namespace hha {

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw std::invalid_argument(std::string("HybridSystemParams: non-finite ") + what);
    }
}

void check_dims(const HybridSystemParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    if (x.size() != p.state_dim || u.size() != p.control_dim) {
        throw std::invalid_argument("hybrid model: state/control dimension mismatch");
    }
}

}  // namespace

void HybridSystemParams::validate() const {
    if (num_modes < 1 || state_dim < 1 || control_dim < 0) {
        throw std::invalid_argument("HybridSystemParams: bad dimensions");
    }
    const auto k = static_cast<std::size_t>(num_modes);
    if (A.size() != k || B.size() != k || b.size() != k || Q.size() != k) {
        throw std::invalid_argument("HybridSystemParams: per-mode containers must have K entries");
    }
    for (int z = 0; z < num_modes; ++z) {
        if (A[z].rows() != state_dim || A[z].cols() != state_dim ||
            B[z].rows() != state_dim || B[z].cols() != control_dim ||
            b[z].size() != state_dim || Q[z].size() != state_dim) {
            throw std::invalid_argument("HybridSystemParams: per-mode dimension mismatch");
        }
        check_finite(A[z], "A");
        check_finite(B[z], "B");
        check_finite(b[z], "b");
        check_finite(Q[z], "Q");
        if ((Q[z].array() <= 0.0).any()) {
            throw std::invalid_argument("HybridSystemParams: process noise variances must be positive");
        }
    }
    if (W_x.rows() != num_modes || W_x.cols() != state_dim ||
        W_u.rows() != num_modes || W_u.cols() != control_dim || r.size() != num_modes) {
        throw std::invalid_argument("HybridSystemParams: recurrence dimension mismatch");
    }
    check_finite(W_x, "W_x");
    check_finite(W_u, "W_u");
    check_finite(r, "r");
    if (S.size() != state_dim || (S.array() <= 0.0).any()) {
        throw std::invalid_argument("HybridSystemParams: observation variances must be positive");
    }
}

HybridSystemParams HybridSystemParams::zero(int num_modes, int state_dim, int control_dim) {
    HybridSystemParams p;
    p.num_modes = num_modes;
    p.state_dim = state_dim;
    p.control_dim = control_dim;
    p.A.assign(num_modes, Eigen::MatrixXd::Identity(state_dim, state_dim));
    p.B.assign(num_modes, Eigen::MatrixXd::Zero(state_dim, control_dim));
    p.b.assign(num_modes, Eigen::VectorXd::Zero(state_dim));
    p.Q.assign(num_modes, Eigen::VectorXd::Ones(state_dim));
    p.W_x = Eigen::MatrixXd::Zero(num_modes, state_dim);
    p.W_u = Eigen::MatrixXd::Zero(num_modes, control_dim);
    p.r = Eigen::VectorXd::Zero(num_modes);
    p.S = Eigen::VectorXd::Ones(state_dim);
    return p;
}

void Trajectory::validate(int num_modes) const {
    const std::size_t n = states.size();
    if (controls.size() != n || modes.size() != n || rewards.size() != n || switch_flags.size() != n) {
        throw std::invalid_argument("Trajectory: sequences must have equal length");
    }
    for (std::size_t t = 0; t < n; ++t) {
        if (modes[t] < 0 || modes[t] >= num_modes) {
            throw std::invalid_argument("Trajectory: mode index out of range");
        }
        const bool expected = t > 0 && modes[t] != modes[t - 1];
        if (switch_flags[t] != expected) {
            throw std::invalid_argument("Trajectory: switch_flags inconsistent with modes");
        }
    }
}

void Trajectory::refresh_switch_flags() {
    switch_flags.assign(modes.size(), false);
    for (std::size_t t = 1; t < modes.size(); ++t) {
        switch_flags[t] = modes[t] != modes[t - 1];
    }
}

Eigen::VectorXd mode_logits(const HybridSystemParams& p, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& u) {
    check_dims(p, x, u);
    return p.W_x * x + p.W_u * u + p.r;
}

Eigen::VectorXd mode_transition_probs(const HybridSystemParams& p, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u) {
    return softmax(mode_logits(p, x, u));
}

int most_likely_mode(const HybridSystemParams& p, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u) {
    return argmax(mode_transition_probs(p, x, u));
}

Eigen::VectorXd step_dynamics(const HybridSystemParams& p, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, int z,
                              std::optional<std::uint64_t> noise_seed) {
    check_dims(p, x, u);
    if (z < 0 || z >= p.num_modes) {
        throw std::domain_error("step_dynamics: invalid mode index");
    }
    Eigen::VectorXd next = p.A[z] * x + p.B[z] * u + p.b[z];
    if (noise_seed) {
        Rng rng(*noise_seed);
        for (int m = 0; m < p.state_dim; ++m) {
            next[m] += std::sqrt(p.Q[z][m]) * rng.normal();
        }
    }
    return next;
}

Trajectory simulate(const HybridSystemParams& p, const Eigen::VectorXd& x0,
                    const std::vector<Eigen::VectorXd>& controls,
                    const SimulateOptions& opts) {
    if (!x0.allFinite()) throw std::invalid_argument("simulate: non-finite initial state");
    const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(p.control_dim);

    Rng rng(opts.seed);
    Trajectory traj;
    const std::size_t steps = controls.size();
    traj.states.reserve(steps + 1);
    traj.controls.reserve(steps + 1);
    traj.modes.reserve(steps + 1);
    traj.rewards.assign(steps + 1, 0.0);

    traj.states.push_back(x0);
    traj.modes.push_back(most_likely_mode(p, x0, steps > 0 ? controls[0] : zero_u));

    for (std::size_t t = 0; t < steps; ++t) {
        const Eigen::VectorXd& x = traj.states.back();
        const Eigen::VectorXd& u = controls[t];
        const int z = traj.modes.back();

        Eigen::VectorXd next = p.A[z] * x + p.B[z] * u + p.b[z];
        if (opts.process_noise) {
            for (int m = 0; m < p.state_dim; ++m) {
                next[m] += std::sqrt(p.Q[z][m]) * rng.normal();
            }
        }

        const Eigen::VectorXd probs = mode_transition_probs(p, x, u);
        const int z_next = opts.sample_modes ? rng.categorical(probs) : argmax(probs);

        traj.controls.push_back(u);
        traj.states.push_back(next);
        traj.modes.push_back(z_next);
    }
    traj.controls.push_back(zero_u);
    traj.refresh_switch_flags();
    return traj;
}

namespace {

// log N(y; mean, diag(Q))
double gaussian_log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& q) {
    const double log_two_pi = 1.8378770664093454835606594728112;
    double ll = 0.0;
    for (int m = 0; m < y.size(); ++m) {
        const double resid = y[m] - mean[m];
        ll += -0.5 * (log_two_pi + std::log(q[m])) - resid * resid / (2.0 * q[m]);
    }
    return ll;
}

}  // namespace

double log_likelihood(const HybridSystemParams& p, const Trajectory& traj) {
    traj.validate(p.num_modes);
    for (int z = 0; z < p.num_modes; ++z) {
        if ((p.Q[z].array() <= 0.0).any()) {
            throw std::domain_error("log_likelihood: zero process noise variance");
        }
    }
    const std::size_t n = traj.length();
    double ll = 0.0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
        const Eigen::VectorXd& x = traj.states[t];
        const Eigen::VectorXd& u = traj.controls[t];
        const int z = traj.modes[t];
        const Eigen::VectorXd mean = p.A[z] * x + p.B[z] * u + p.b[z];
        ll += gaussian_log_density(traj.states[t + 1], mean, p.Q[z]);
        ll += log_softmax(mode_logits(p, x, u))[traj.modes[t + 1]];
    }
    return ll;
}

std::vector<int> assign_modes(const HybridSystemParams& p,
                              const std::vector<Eigen::VectorXd>& states,
                              const std::vector<Eigen::VectorXd>& controls) {
    const std::size_t n = states.size();
    if (n == 0) return {};
    if (controls.size() != n) {
        throw std::invalid_argument("assign_modes: states/controls length mismatch");
    }
    const int K = p.num_modes;
    const int M = p.state_dim;
    const int N = p.control_dim;
    if (n == 1) {
        return {most_likely_mode(p, states[0], controls[0])};
    }
    const auto rows = static_cast<Eigen::Index>(n) - 1;

    Eigen::MatrixXd X(rows, M), U(rows, N), Y(rows, M);
    for (Eigen::Index t = 0; t < rows; ++t) {
        X.row(t) = states[t].transpose();
        U.row(t) = controls[t].transpose();
        Y.row(t) = states[t + 1].transpose();
    }

    const double log_two_pi = 1.8378770664093454835606594728112;

    // node scores: Gaussian density of the outgoing transition, batched per mode
    Eigen::MatrixXd node(rows, K);
    for (int k = 0; k < K; ++k) {
        Eigen::MatrixXd resid = Y - X * p.A[k].transpose() - U * p.B[k].transpose();
        resid.rowwise() -= p.b[k].transpose();
        const Eigen::ArrayXd inv2q = 0.5 / p.Q[k].array();
        const double log_norm =
            -0.5 * (M * log_two_pi + p.Q[k].array().log().sum());
        node.col(k) =
            (-(resid.array().square().rowwise() * inv2q.transpose()).rowwise().sum() + log_norm)
                .matrix();
    }

    // recurrence log probabilities at (x_t, u_t), row-wise log softmax
    Eigen::MatrixXd trans = X * p.W_x.transpose() + U * p.W_u.transpose();
    trans.rowwise() += p.r.transpose();
    const Eigen::VectorXd row_max = trans.rowwise().maxCoeff();
    trans.colwise() -= row_max;
    const Eigen::VectorXd lse = trans.array().exp().rowwise().sum().log();
    trans.colwise() -= lse;

    // Viterbi over mode sequences. The transition weight into z_{t+1}=j does
    // not depend on z_t in the recurrent-only model, but the full O(K^2) pass
    // is kept.
    Eigen::MatrixXd delta(n, K);
    Eigen::MatrixXi back(n, K);
    for (int k = 0; k < K; ++k) {
        delta(0, k) = node(0, k);
        back(0, k) = -1;
    }
    for (std::size_t t = 1; t < n; ++t) {
        for (int j = 0; j < K; ++j) {
            double best = -std::numeric_limits<double>::infinity();
            int best_k = 0;
            for (int k = 0; k < K; ++k) {
                const double cand = delta(t - 1, k) + trans(t - 1, j);
                if (cand > best) {
                    best = cand;
                    best_k = k;
                }
            }
            delta(t, j) = best + (static_cast<Eigen::Index>(t) < rows ? node(t, j) : 0.0);
            back(t, j) = best_k;
        }
    }

    std::vector<int> labels(n, 0);
    int best_k = 0;
    for (int k = 1; k < K; ++k) {
        if (delta(n - 1, k) > delta(n - 1, best_k)) best_k = k;
    }
    labels[n - 1] = best_k;
    for (std::size_t t = n - 1; t > 0; --t) {
        labels[t - 1] = back(t, labels[t]);
    }
    return labels;
}

double softmax_regression_objective_packed(const Eigen::MatrixXd& W,
                                           const Eigen::MatrixXd& phi,
                                           const std::vector<int>& labels,
                                           Eigen::MatrixXd* gradient) {
    const Eigen::Index n = phi.rows();
    if (static_cast<std::size_t>(n) != labels.size() || n == 0 || phi.cols() != W.cols()) {
        throw std::invalid_argument("softmax_regression_objective: bad data");
    }
    const double inv_n = 1.0 / static_cast<double>(n);

    Eigen::MatrixXd logits = phi * W.transpose();  // n x K
    const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
    logits.colwise() -= row_max;
    Eigen::MatrixXd probs = logits.array().exp();
    const Eigen::VectorXd norm = probs.rowwise().sum();

    double obj = -norm.array().log().sum();
    for (Eigen::Index i = 0; i < n; ++i) obj += logits(i, labels[i]);

    if (gradient) {
        probs.array().colwise() /= norm.array();
        probs = -probs;
        for (Eigen::Index i = 0; i < n; ++i) probs(i, labels[i]) += 1.0;
        gradient->noalias() = inv_n * (probs.transpose() * phi);
    }
    return obj * inv_n;
}

double softmax_regression_objective(const Eigen::MatrixXd& W,
                                    const std::vector<Eigen::VectorXd>& features,
                                    const std::vector<int>& labels,
                                    Eigen::MatrixXd* gradient) {
    if (features.size() != labels.size() || features.empty()) {
        throw std::invalid_argument("softmax_regression_objective: bad data");
    }
    const int D = static_cast<int>(W.cols());
    Eigen::MatrixXd phi(features.size(), D);
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].size() != D - 1) {
            throw std::invalid_argument("softmax_regression_objective: feature dimension mismatch");
        }
        phi.row(i).head(D - 1) = features[i].transpose();
        phi(i, D - 1) = 1.0;
    }
    return softmax_regression_objective_packed(W, phi, labels, gradient);
}

}  // namespace hha
