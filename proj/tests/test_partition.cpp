#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "hha/numeric.hpp"
#include "hha/partition.hpp"
#include "hha/rng.hpp"
#include "hha/simplex.hpp"

using namespace hha;

namespace {

Bounds box1d(double lo, double hi) {
    Bounds b;
    b.lower = Eigen::VectorXd::Constant(1, lo);
    b.upper = Eigen::VectorXd::Constant(1, hi);
    return b;
}

HybridSystemParams recurrence_only(const Eigen::MatrixXd& W, const Eigen::VectorXd& r) {
    HybridSystemParams p =
        HybridSystemParams::zero(static_cast<int>(W.rows()), static_cast<int>(W.cols()), 1);
    p.W_x = W;
    p.r = r;
    return p;
}

}  // namespace

TEST_CASE("simplex handles optimal, infeasible and equality instances") {
    // max x (as min -x) subject to x <= 5
    Eigen::MatrixXd a_ub(1, 1);
    a_ub << 1.0;
    LpResult r = solve_lp(Eigen::VectorXd::Constant(1, -1.0), Eigen::MatrixXd(0, 1),
                          Eigen::VectorXd(0), a_ub, Eigen::VectorXd::Constant(1, 5.0));
    CHECK(r.status == LpStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(5.0));

    // x <= -1 with x >= 0 is infeasible
    r = solve_lp(Eigen::VectorXd::Zero(1), Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), a_ub,
                 Eigen::VectorXd::Constant(1, -1.0));
    CHECK(r.status == LpStatus::Infeasible);

    // min x1 s.t. x1 + x2 = 1
    Eigen::MatrixXd a_eq(1, 2);
    a_eq << 1.0, 1.0;
    Eigen::VectorXd c(2);
    c << 1.0, 0.0;
    r = solve_lp(c, a_eq, Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd(0, 2),
                 Eigen::VectorXd(0));
    CHECK(r.status == LpStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(0.0));
    CHECK(r.x[1] == doctest::Approx(1.0));

    // min -x with no upper bound is unbounded
    r = solve_lp(Eigen::VectorXd::Constant(1, -1.0), Eigen::MatrixXd(0, 1), Eigen::VectorXd(0),
                 Eigen::MatrixXd(0, 1), Eigen::VectorXd(0));
    CHECK(r.status == LpStatus::Unbounded);
}

TEST_CASE("two half-lines meeting at zero are adjacent") {
    Eigen::MatrixXd W(2, 1);
    W << 1.0, -1.0;
    const HybridSystemParams p = recurrence_only(W, Eigen::VectorXd::Zero(2));
    const AdjacencyMatrix adj = extract_adjacency(p, box1d(-1.0, 1.0));
    CHECK(adj.adjacent(0, 1));
    CHECK(adj.adjacent(1, 0));
    CHECK(adj.adjacent(0, 0));
    CHECK(adj.adjacent(1, 1));
}

TEST_CASE("three-cell line partition has chain adjacency") {
    // regions approximately x < -1, -1 < x < 1, x > 1
    Eigen::MatrixXd W(3, 1);
    W << -10.0, 0.0, 10.0;
    Eigen::VectorXd r(3);
    r << -10.0, 0.0, -10.0;
    const HybridSystemParams p = recurrence_only(W, r);
    const AdjacencyMatrix adj = extract_adjacency(p, box1d(-2.0, 2.0));
    CHECK(adj.adjacent(0, 1));
    CHECK(adj.adjacent(1, 2));
    CHECK_FALSE(adj.adjacent(0, 2));
    CHECK_FALSE(adj.adjacent(2, 0));
}

TEST_CASE("bounds can cut off an otherwise shared boundary") {
    Eigen::MatrixXd W(2, 1);
    W << 1.0, -1.0;  // boundary at x = 0
    const HybridSystemParams p = recurrence_only(W, Eigen::VectorXd::Zero(2));
    const AdjacencyMatrix adj = extract_adjacency(p, box1d(0.5, 1.5));
    CHECK_FALSE(adj.adjacent(0, 1));
}

TEST_CASE("single region is trivially adjacent to itself") {
    const HybridSystemParams p =
        recurrence_only(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1));
    const AdjacencyMatrix adj = extract_adjacency(p, box1d(-1.0, 1.0));
    CHECK(adj.num_modes == 1);
    CHECK(adj.adjacent(0, 0));
}

TEST_CASE("softmax probability gradient matches central finite differences") {
    Rng rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        const int K = 2 + rng.uniform_int(4);
        const int M = 1 + rng.uniform_int(3);
        HybridSystemParams p = HybridSystemParams::zero(K, M, 1);
        for (int k = 0; k < K; ++k) {
            for (int m = 0; m < M; ++m) p.W_x(k, m) = rng.uniform(-3.0, 3.0);
            p.r[k] = rng.uniform(-1.0, 1.0);
        }
        Eigen::VectorXd x(M);
        for (int m = 0; m < M; ++m) x[m] = rng.uniform(-1.0, 1.0);
        const int target = rng.uniform_int(K);
        const Eigen::VectorXd grad = softmax_probability_gradient(p, target, x);
        const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);

        const double h = 1e-6;
        for (int m = 0; m < M; ++m) {
            Eigen::VectorXd xp = x, xm = x;
            xp[m] += h;
            xm[m] -= h;
            const double fd = (mode_transition_probs(p, xp, u)[target] -
                               mode_transition_probs(p, xm, u)[target]) /
                              (2.0 * h);
            const double scale = std::max({1e-9, std::abs(fd), std::abs(grad[m])});
            CHECK(std::abs(fd - grad[m]) / scale < 1e-6);
        }
    }
}

TEST_CASE("control prior solves the two-class line by hand") {
    Eigen::MatrixXd W(2, 1);
    W << 1.0, -1.0;
    const HybridSystemParams p = recurrence_only(W, Eigen::VectorXd::Zero(2));
    const Bounds bounds = box1d(-1.0, 1.0);

    const ControlPrior prior = control_prior(p, 0, bounds, Eigen::VectorXd::Zero(1));
    CHECK(prior.attained);
    CHECK(prior.attained_probability >= 0.7);
    // sigma(2x) >= 0.7 requires x >= ln(7/3)/2
    CHECK(prior.point[0] >= 0.5 * std::log(7.0 / 3.0) - 1e-9);
    CHECK(most_likely_mode(p, prior.point, Eigen::VectorXd::Zero(1)) == 0);
}

TEST_CASE("control prior flags targets whose region is out of reach") {
    // mode 1 dominates only around x = 10, far outside the box
    Eigen::MatrixXd W(2, 1);
    W << 0.0, 1.0;
    Eigen::VectorXd r(2);
    r << 0.0, -5.0;
    const HybridSystemParams p = recurrence_only(W, r);
    const ControlPrior prior = control_prior(p, 1, box1d(-1.0, 1.0), Eigen::VectorXd::Zero(1));
    CHECK_FALSE(prior.attained);
    CHECK(prior.attained_probability < 0.7);
}

TEST_CASE("control prior returns a satisfying init unchanged") {
    Eigen::MatrixXd W(2, 1);
    W << 1.0, -1.0;
    const HybridSystemParams p = recurrence_only(W, Eigen::VectorXd::Zero(2));
    const Eigen::VectorXd init = Eigen::VectorXd::Constant(1, 0.9);
    const ControlPrior prior = control_prior(p, 0, box1d(-1.0, 1.0), init);
    CHECK(prior.attained);
    CHECK(prior.point == init);
}

TEST_CASE("every attained prior classifies to its own mode") {
    Rng rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        const int K = 3 + rng.uniform_int(3);
        HybridSystemParams p = HybridSystemParams::zero(K, 2, 1);
        for (int k = 0; k < K; ++k) {
            p.W_x(k, 0) = rng.uniform(-6.0, 6.0);
            p.W_x(k, 1) = rng.uniform(-6.0, 6.0);
            p.r[k] = rng.uniform(-1.0, 1.0);
        }
        Bounds bounds;
        bounds.lower = Eigen::Vector2d(-2.0, -2.0);
        bounds.upper = Eigen::Vector2d(2.0, 2.0);
        for (int k = 0; k < K; ++k) {
            const ControlPrior prior = control_prior(p, k, bounds, bounds.center());
            if (prior.attained) {
                CHECK(most_likely_mode(p, prior.point, Eigen::VectorXd::Zero(1)) == k);
            }
        }
    }
}

TEST_CASE("LP adjacency agrees with a dense sampling oracle on random 2-D partitions") {
    Rng rng(71);
    for (int trial = 0; trial < 6; ++trial) {
        const int K = 4;
        HybridSystemParams p = HybridSystemParams::zero(K, 2, 1);
        for (int k = 0; k < K; ++k) {
            p.W_x(k, 0) = rng.uniform(-4.0, 4.0);
            p.W_x(k, 1) = rng.uniform(-4.0, 4.0);
            p.r[k] = rng.uniform(-1.0, 1.0);
        }
        Bounds bounds;
        bounds.lower = Eigen::Vector2d(-1.0, -1.0);
        bounds.upper = Eigen::Vector2d(1.0, 1.0);
        const AdjacencyMatrix adj = extract_adjacency(p, bounds);

        // sample: a pair is empirically adjacent when some point has that pair
        // as its top-two logits with a small gap
        const int n_samples = 100000;
        std::set<std::pair<int, int>> sampled;
        std::vector<std::vector<double>> min_gap(K, std::vector<double>(K, 1e100));
        for (int s = 0; s < n_samples; ++s) {
            const Eigen::Vector2d x(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
            const Eigen::VectorXd logits = p.W_x * x + p.r;
            int top = 0, second = 1;
            if (logits[1] > logits[0]) std::swap(top, second);
            for (int k = 2; k < K; ++k) {
                if (logits[k] > logits[top]) {
                    second = top;
                    top = k;
                } else if (logits[k] > logits[second]) {
                    second = k;
                }
            }
            const double gap = logits[top] - logits[second];
            const int i = std::min(top, second), j = std::max(top, second);
            min_gap[i][j] = std::min(min_gap[i][j], gap);
            if (gap < 1e-3) sampled.insert({i, j});
        }

        for (int i = 0; i < K; ++i) {
            for (int j = i + 1; j < K; ++j) {
                // sampled adjacency must be confirmed by the LP
                if (sampled.count({i, j})) {
                    CHECK(adj.adjacent(i, j));
                }
                // an LP-adjacent pair must be near-tied somewhere in the sample
                if (adj.adjacent(i, j)) {
                    const double band =
                        0.05 * std::max(1.0, (p.W_x.row(i) - p.W_x.row(j)).norm());
                    CHECK(min_gap[i][j] < band);
                }
            }
        }
    }
}
