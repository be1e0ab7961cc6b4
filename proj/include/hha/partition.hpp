#pragma once

#include <vector>

#include <Eigen/Dense>

#include "hha/hybrid_model.hpp"

namespace hha {

// axis-aligned box in state space
struct Bounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    void validate() const;
    Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
    Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
    bool contains(const Eigen::VectorXd& x) const;
};

struct AdjacencyMatrix {
    int num_modes = 0;
    std::vector<std::uint8_t> data;  // row-major K x K
    Bounds bounds;                   // box the extraction was run over

    static AdjacencyMatrix identity(int num_modes, const Bounds& bounds);
    bool adjacent(int i, int j) const { return data[i * num_modes + j] != 0; }
    void set(int i, int j, bool value);
};

// Modes i and j are adjacent when some in-bounds point ties their recurrence
// logits while weakly dominating all others (control fixed to zero). Decided
// per pair by a small feasibility LP; solver failure counts as adjacent.
AdjacencyMatrix extract_adjacency(const HybridSystemParams& params, const Bounds& bounds);

struct ControlPrior {
    int mode = -1;
    Eigen::VectorXd point;
    double attained_probability = 0.0;
    bool attained = false;  // reached the stopping threshold
};

struct ControlPriorOptions {
    double threshold = 0.7;      // stopping probability
    double learning_rate = 0.5;  // ascent rate on the probability gradient
    int max_iters = 10000;
};

// Gradient ascent on P(z = target | x, u = 0) from `init`, clamped to bounds.
// Returns the best point seen; `attained` marks whether the threshold was hit.
ControlPrior control_prior(const HybridSystemParams& params, int target_mode,
                           const Bounds& bounds, const Eigen::VectorXd& init,
                           const ControlPriorOptions& opts = {});

// d P(z = target | x, u = 0) / dx, exposed for finite-difference checks
Eigen::VectorXd softmax_probability_gradient(const HybridSystemParams& params, int target_mode,
                                             const Eigen::VectorXd& x);

}  // namespace hha
