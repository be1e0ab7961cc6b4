#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace hha {

// Recurrent-only switching linear dynamical system. Mode transitions follow a
// softmax over (state, control); each mode carries affine dynamics with
// diagonal Gaussian process noise. Emissions are identity with diagonal noise.
struct HybridSystemParams {
    int num_modes = 0;    // K
    int state_dim = 0;    // M
    int control_dim = 0;  // N

    std::vector<Eigen::MatrixXd> A;  // per mode, M x M
    std::vector<Eigen::MatrixXd> B;  // per mode, M x N
    std::vector<Eigen::VectorXd> b;  // per mode, M
    std::vector<Eigen::VectorXd> Q;  // per mode, M diagonal process noise variances

    Eigen::MatrixXd W_x;  // K x M recurrence weights
    Eigen::MatrixXd W_u;  // K x N recurrence weights
    Eigen::VectorXd r;    // K recurrence bias

    Eigen::VectorXd S;  // M diagonal observation variances

    void validate() const;  // dimension consistency, positive variances, finiteness

    // zero-initialized parameter set of the given dimensions (A=I, Q=S=1)
    static HybridSystemParams zero(int num_modes, int state_dim, int control_dim);
};

// Equal-length per-time-point records. controls[t] is the control applied at
// time t (zero padding at the final point); rewards[t] is the reward returned
// by the step taken at time t; modes[t] labels the dynamics governing the
// transition out of point t.
struct Trajectory {
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> controls;
    std::vector<int> modes;
    std::vector<double> rewards;
    std::vector<bool> switch_flags;

    std::size_t length() const { return states.size(); }
    void validate(int num_modes) const;

    // recompute switch_flags from modes
    void refresh_switch_flags();
};

Eigen::VectorXd mode_logits(const HybridSystemParams& p, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& u);

// softmax(W_x x + W_u u + r); entries positive, sums to 1
Eigen::VectorXd mode_transition_probs(const HybridSystemParams& p, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u);

// argmax of mode_transition_probs, ties toward the lowest index
int most_likely_mode(const HybridSystemParams& p, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u);

// A_z x + B_z u + b_z, plus N(0, Q_z) noise when a seed is supplied
Eigen::VectorXd step_dynamics(const HybridSystemParams& p, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, int z,
                              std::optional<std::uint64_t> noise_seed = std::nullopt);

struct SimulateOptions {
    bool sample_modes = true;   // otherwise argmax
    bool process_noise = true;  // otherwise noiseless dynamics
    std::uint64_t seed = 0;
};

// Rolls the generative model forward under the given open-loop controls.
Trajectory simulate(const HybridSystemParams& p, const Eigen::VectorXd& x0,
                    const std::vector<Eigen::VectorXd>& controls,
                    const SimulateOptions& opts = {});

// Complete-data log likelihood of a trajectory with known modes: Gaussian
// dynamics terms plus categorical recurrence terms.
double log_likelihood(const HybridSystemParams& p, const Trajectory& traj);

// Viterbi maximum a posteriori mode sequence for observed states/controls.
std::vector<int> assign_modes(const HybridSystemParams& p,
                              const std::vector<Eigen::VectorXd>& states,
                              const std::vector<Eigen::VectorXd>& controls);

struct FitOptions {
    int max_iters = 30;
    double tol = 1e-3;  // stop when complete-data log likelihood improves less
    double ridge_lambda = 1e-4;
    double variance_floor = 1e-8;
    double obs_variance = 1e-6;
    double softmax_learning_rate = 0.1;
    int softmax_max_iters = 500;
    double softmax_grad_tol = 1e-6;
    double softmax_obj_tol = 1e-8;   // per-iteration mean-LL progress floor
    int init_window = 10;            // window length for regression-feature k-means init
    int min_points_per_mode = 10;
    std::uint64_t seed = 0;
};

struct FitResult {
    HybridSystemParams params;
    std::vector<std::vector<int>> labels;  // per trajectory, per time point
    std::vector<double> ll_history;        // complete-data LL after each EM round
    double final_log_likelihood = 0.0;
    int iterations = 0;
    int active_modes = 0;  // modes with at least one assigned point
    bool converged = false;
};

// Hard-EM coordinate ascent: Viterbi mode assignment alternating with per-mode
// ridge regression and softmax-regression updates of the recurrence weights.
FitResult fit(const std::vector<Trajectory>& dataset, int num_modes, const FitOptions& opts = {});

// Mean log likelihood of a softmax regression with bias (last column of W is
// the bias) on feature/label pairs; optionally writes the gradient. Exposed so
// the gradient can be checked against finite differences.
double softmax_regression_objective(const Eigen::MatrixXd& W,
                                    const std::vector<Eigen::VectorXd>& features,
                                    const std::vector<int>& labels,
                                    Eigen::MatrixXd* gradient = nullptr);

// same objective over a packed feature matrix whose last column is already 1
double softmax_regression_objective_packed(const Eigen::MatrixXd& W,
                                           const Eigen::MatrixXd& phi,
                                           const std::vector<int>& labels,
                                           Eigen::MatrixXd* gradient = nullptr);

}  // namespace hha
