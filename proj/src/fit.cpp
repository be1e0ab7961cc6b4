#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hha/hybrid_model.hpp"
#include "hha/numeric.hpp"
#include "hha/rng.hpp"

namespace hha {

namespace {

struct TransitionData {
    // flattened over trajectories: transitions (x_t, u_t) -> x_{t+1}
    std::vector<Eigen::VectorXd> x;
    std::vector<Eigen::VectorXd> u;
    std::vector<Eigen::VectorXd> x_next;
    std::vector<int> traj_index;
    std::vector<int> time_index;
};

TransitionData flatten(const std::vector<Trajectory>& dataset) {
    TransitionData d;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Trajectory& traj = dataset[i];
        for (std::size_t t = 0; t + 1 < traj.length(); ++t) {
            d.x.push_back(traj.states[t]);
            d.u.push_back(traj.controls[t]);
            d.x_next.push_back(traj.states[t + 1]);
            d.traj_index.push_back(static_cast<int>(i));
            d.time_index.push_back(static_cast<int>(t));
        }
    }
    return d;
}

// local regression coefficients over a window of transitions, ridge-stabilized
Eigen::VectorXd window_feature(const Trajectory& traj, int t0, int w, int M, int N) {
    const int D = M + N + 1;
    Eigen::MatrixXd phi(w, D);
    Eigen::MatrixXd y(w, M);
    for (int s = 0; s < w; ++s) {
        phi.row(s).head(M) = traj.states[t0 + s].transpose();
        phi.row(s).segment(M, N) = traj.controls[t0 + s].transpose();
        phi(s, D - 1) = 1.0;
        y.row(s) = traj.states[t0 + s + 1].transpose();
    }
    const Eigen::MatrixXd gram =
        phi.transpose() * phi + 1e-3 * Eigen::MatrixXd::Identity(D, D);
    const Eigen::MatrixXd theta = gram.ldlt().solve(phi.transpose() * y);  // D x M
    return Eigen::Map<const Eigen::VectorXd>(theta.data(), D * M);
}

std::vector<int> kmeans(const std::vector<Eigen::VectorXd>& points, int K, Rng& rng) {
    const int n = static_cast<int>(points.size());
    std::vector<int> labels(n, 0);
    if (K <= 1 || n == 0) return labels;

    // k-means++ seeding
    std::vector<Eigen::VectorXd> centers;
    centers.push_back(points[rng.uniform_int(n)]);
    Eigen::VectorXd dist2(n);
    while (static_cast<int>(centers.size()) < K) {
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) {
                best = std::min(best, (points[i] - c).squaredNorm());
            }
            dist2[i] = best;
        }
        if (dist2.sum() <= 0.0) {
            centers.push_back(points[rng.uniform_int(n)]);
            continue;
        }
        centers.push_back(points[rng.categorical(dist2)]);
    }

    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best_k = 0;
            double best = (points[i] - centers[0]).squaredNorm();
            for (int k = 1; k < K; ++k) {
                const double d = (points[i] - centers[k]).squaredNorm();
                if (d < best) {
                    best = d;
                    best_k = k;
                }
            }
            if (labels[i] != best_k) {
                labels[i] = best_k;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;

        for (int k = 0; k < K; ++k) {
            Eigen::VectorXd sum = Eigen::VectorXd::Zero(points[0].size());
            int count = 0;
            for (int i = 0; i < n; ++i) {
                if (labels[i] == k) {
                    sum += points[i];
                    ++count;
                }
            }
            if (count > 0) {
                centers[k] = sum / count;
            } else {
                // reseed an empty cluster at the point farthest from its center
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d = (points[i] - centers[labels[i]]).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                centers[k] = points[far];
                labels[far] = k;
            }
        }
    }
    return labels;
}

// initial per-time-point labels: k-means over windowed regression features
std::vector<std::vector<int>> init_labels(const std::vector<Trajectory>& dataset, int K,
                                          const FitOptions& opts, Rng& rng) {
    const int M = static_cast<int>(dataset[0].states[0].size());
    const int N = static_cast<int>(dataset[0].controls[0].size());

    std::vector<Eigen::VectorXd> features;
    std::vector<std::pair<int, int>> where;  // (traj, t)
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Trajectory& traj = dataset[i];
        const int trans = static_cast<int>(traj.length()) - 1;
        if (trans <= 0) continue;
        const int w = std::max(1, std::min(opts.init_window, trans));
        for (int t = 0; t < trans; ++t) {
            const int t0 = std::clamp(t - w / 2, 0, trans - w);
            features.push_back(window_feature(traj, t0, w, M, N));
            where.emplace_back(static_cast<int>(i), t);
        }
    }
    const std::vector<int> flat = kmeans(features, K, rng);

    std::vector<std::vector<int>> labels(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        labels[i].assign(dataset[i].length(), 0);
    }
    for (std::size_t j = 0; j < where.size(); ++j) {
        labels[where[j].first][where[j].second] = flat[j];
    }
    // final point of each trajectory inherits the label of its last transition
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::size_t n = dataset[i].length();
        if (n >= 2) labels[i][n - 1] = labels[i][n - 2];
    }
    return labels;
}

double complete_data_ll(const HybridSystemParams& p, const std::vector<Trajectory>& dataset,
                        const std::vector<std::vector<int>>& labels) {
    double ll = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        Trajectory t = dataset[i];
        t.modes = labels[i];
        if (t.rewards.size() != t.length()) t.rewards.assign(t.length(), 0.0);
        t.refresh_switch_flags();
        ll += log_likelihood(p, t);
    }
    return ll;
}

// per-mode Gaussian dynamics contribution for candidate (A,B,b,Q), used to
// guard the M-step against regressions of the complete-data likelihood
double mode_dynamics_ll(const TransitionData& d, const std::vector<std::vector<int>>& labels,
                        int k, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::VectorXd& b, const Eigen::VectorXd& Q) {
    const double log_two_pi = 1.8378770664093454835606594728112;
    double ll = 0.0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        if (labels[d.traj_index[i]][d.time_index[i]] != k) continue;
        const Eigen::VectorXd mean = A * d.x[i] + B * d.u[i] + b;
        for (int m = 0; m < mean.size(); ++m) {
            const double resid = d.x_next[i][m] - mean[m];
            ll += -0.5 * (log_two_pi + std::log(Q[m])) - resid * resid / (2.0 * Q[m]);
        }
    }
    return ll;
}

void m_step_dynamics(const TransitionData& d, const std::vector<std::vector<int>>& labels,
                     HybridSystemParams& p, const FitOptions& opts) {
    const int M = p.state_dim;
    const int N = p.control_dim;
    const int D = M + N + 1;

    for (int k = 0; k < p.num_modes; ++k) {
        std::vector<int> rows;
        for (std::size_t i = 0; i < d.x.size(); ++i) {
            if (labels[d.traj_index[i]][d.time_index[i]] == k) rows.push_back(static_cast<int>(i));
        }
        if (static_cast<int>(rows.size()) < D) continue;  // too few points, keep previous fit

        Eigen::MatrixXd phi(rows.size(), D);
        Eigen::MatrixXd y(rows.size(), M);
        for (std::size_t s = 0; s < rows.size(); ++s) {
            phi.row(s).head(M) = d.x[rows[s]].transpose();
            phi.row(s).segment(M, N) = d.u[rows[s]].transpose();
            phi(s, D - 1) = 1.0;
            y.row(s) = d.x_next[rows[s]].transpose();
        }
        const Eigen::MatrixXd gram =
            phi.transpose() * phi + opts.ridge_lambda * Eigen::MatrixXd::Identity(D, D);
        const Eigen::MatrixXd theta = gram.ldlt().solve(phi.transpose() * y);  // D x M

        Eigen::MatrixXd A = theta.topRows(M).transpose();
        Eigen::MatrixXd B = theta.middleRows(M, N).transpose();
        Eigen::VectorXd b = theta.bottomRows(1).transpose();
        const Eigen::MatrixXd resid = y - phi * theta;
        Eigen::VectorXd Q =
            resid.array().square().colwise().mean().transpose().cwiseMax(opts.variance_floor);

        // keep whichever parameterization scores better on the current labels
        const double ll_new = mode_dynamics_ll(d, labels, k, A, B, b, Q);
        const double ll_old = mode_dynamics_ll(d, labels, k, p.A[k], p.B[k], p.b[k], p.Q[k]);
        if (ll_new >= ll_old) {
            p.A[k] = std::move(A);
            p.B[k] = std::move(B);
            p.b[k] = std::move(b);
            p.Q[k] = std::move(Q);
        }
    }
}

void m_step_recurrence(const TransitionData& d, const std::vector<std::vector<int>>& labels,
                       HybridSystemParams& p, const FitOptions& opts) {
    const int M = p.state_dim;
    const int N = p.control_dim;
    const int K = p.num_modes;
    const Eigen::Index n = static_cast<Eigen::Index>(d.x.size());
    if (n == 0) return;

    Eigen::MatrixXd phi(n, M + N + 1);
    std::vector<int> targets(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        phi.row(i).head(M) = d.x[i].transpose();
        phi.row(i).segment(M, N) = d.u[i].transpose();
        phi(i, M + N) = 1.0;
        // target is the mode entered at t+1; rows are transitions, so the
        // label one past this row's time index is always defined
        targets[i] = labels[d.traj_index[i]][d.time_index[i] + 1];
    }

    Eigen::MatrixXd W(K, M + N + 1);
    W.leftCols(M) = p.W_x;
    W.middleCols(M, N) = p.W_u;
    W.col(M + N) = p.r;

    Eigen::MatrixXd grad(K, M + N + 1);
    double obj = softmax_regression_objective_packed(W, phi, targets, &grad);
    for (int iter = 0; iter < opts.softmax_max_iters; ++iter) {
        if (grad.norm() < opts.softmax_grad_tol) break;
        // fixed-rate ascent with halving whenever a step would not improve
        double lr = opts.softmax_learning_rate;
        bool accepted = false;
        double gained = 0.0;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::MatrixXd W_try = W + lr * grad;
            Eigen::MatrixXd grad_try(K, M + N + 1);
            const double obj_try =
                softmax_regression_objective_packed(W_try, phi, targets, &grad_try);
            if (obj_try >= obj) {
                gained = obj_try - obj;
                W = std::move(W_try);
                grad = std::move(grad_try);
                obj = obj_try;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (!accepted || gained < opts.softmax_obj_tol) break;
    }

    p.W_x = W.leftCols(M);
    p.W_u = W.middleCols(M, N);
    p.r = W.col(M + N);
}

}  // namespace

FitResult fit(const std::vector<Trajectory>& dataset, int num_modes, const FitOptions& opts) {
    if (num_modes < 1) throw std::invalid_argument("fit: num_modes must be >= 1");
    if (dataset.empty()) throw std::invalid_argument("fit: empty dataset");

    std::size_t total_transitions = 0;
    for (const auto& traj : dataset) {
        const std::size_t n = traj.length();
        if (n == 0 || traj.controls.size() != n) {
            throw std::invalid_argument("fit: trajectory with inconsistent states/controls");
        }
        if (n >= 2) total_transitions += n - 1;
    }
    if (total_transitions < static_cast<std::size_t>(num_modes) *
                                static_cast<std::size_t>(opts.min_points_per_mode)) {
        throw std::invalid_argument("fit: dataset too small for the requested mode count");
    }

    const int M = static_cast<int>(dataset[0].states[0].size());
    const int N = static_cast<int>(dataset[0].controls[0].size());

    Rng rng(opts.seed);
    const TransitionData data = flatten(dataset);

    HybridSystemParams params = HybridSystemParams::zero(num_modes, M, N);
    for (int k = 0; k < num_modes; ++k) params.Q[k].setConstant(1e-2);
    params.S.setConstant(opts.obs_variance);

    std::vector<std::vector<int>> labels = init_labels(dataset, num_modes, opts, rng);

    FitResult result;
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        m_step_dynamics(data, labels, params, opts);
        m_step_recurrence(data, labels, params, opts);

        const double ll = complete_data_ll(params, dataset, labels);
        result.ll_history.push_back(ll);
        result.iterations = iter + 1;
        if (std::isfinite(prev_ll) && ll - prev_ll < opts.tol) {
            result.converged = true;
            prev_ll = ll;
            break;
        }
        prev_ll = ll;

        bool changed = false;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            std::vector<int> relabeled =
                assign_modes(params, dataset[i].states, dataset[i].controls);
            if (relabeled != labels[i]) changed = true;
            labels[i] = std::move(relabeled);
        }
        if (!changed) {  // assignments are a fixed point of the current model
            result.converged = true;
            break;
        }
    }

    std::vector<bool> seen(num_modes, false);
    for (const auto& traj_labels : labels) {
        for (int z : traj_labels) seen[z] = true;
    }
    result.active_modes = static_cast<int>(std::count(seen.begin(), seen.end(), true));

    result.params = std::move(params);
    result.labels = std::move(labels);
    result.final_log_likelihood = prev_ll;
    return result;
}

}  // namespace hha
