#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hha/hybrid_model.hpp"
#include "hha/numeric.hpp"
#include "hha/rng.hpp"
#include "hha/serialize.hpp"

using namespace hha;

namespace {

HybridSystemParams two_mode_truth() {
    // scalar system switching on the sign of x
    HybridSystemParams p = HybridSystemParams::zero(2, 1, 1);
    p.A[0] << 0.9;
    p.B[0] << 0.2;
    p.b[0] << -0.05;
    p.Q[0] << 1e-4;
    p.A[1] << 0.5;
    p.B[1] << 0.2;
    p.b[1] << 0.05;
    p.Q[1] << 1e-4;
    p.W_x << -8.0, 8.0;
    p.W_u.setZero();
    p.r.setZero();
    p.S.setConstant(1e-6);
    return p;
}

std::vector<Eigen::VectorXd> random_controls(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Eigen::VectorXd> controls;
    for (int t = 0; t < n; ++t) {
        controls.push_back(Eigen::VectorXd::Constant(1, rng.uniform(-1.0, 1.0)));
    }
    return controls;
}

}  // namespace

TEST_CASE("mode transition probs: zero logits are uniform") {
    HybridSystemParams p = HybridSystemParams::zero(4, 2, 1);
    const Eigen::VectorXd probs =
        mode_transition_probs(p, Eigen::Vector2d(0.3, -0.1).eval() * 0.0, Eigen::VectorXd::Zero(1));
    for (int k = 0; k < 4; ++k) CHECK(probs[k] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(std::abs(probs.sum() - 1.0) < 1e-12);
}

TEST_CASE("mode transition probs: hand-evaluated two-class softmax") {
    HybridSystemParams p = HybridSystemParams::zero(2, 1, 1);
    p.r << std::log(3.0), 0.0;
    const Eigen::VectorXd probs =
        mode_transition_probs(p, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
    CHECK(probs[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(probs[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax shift invariance") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        HybridSystemParams p = HybridSystemParams::zero(5, 2, 1);
        p.W_x = Eigen::MatrixXd::NullaryExpr(5, 2, [&](Eigen::Index, Eigen::Index) {
            return rng.uniform(-3.0, 3.0);
        });
        p.r = Eigen::VectorXd::NullaryExpr(5, [&](Eigen::Index) { return rng.uniform(-2.0, 2.0); });
        const Eigen::Vector2d x(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);

        const Eigen::VectorXd base = mode_transition_probs(p, x, u);
        const int base_mode = most_likely_mode(p, x, u);
        p.r.array() += rng.uniform(-10.0, 10.0);
        const Eigen::VectorXd shifted = mode_transition_probs(p, x, u);
        CHECK(most_likely_mode(p, x, u) == base_mode);
        CHECK((base - shifted).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(shifted.sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("most likely mode tie-breaks toward the lowest index") {
    HybridSystemParams p = HybridSystemParams::zero(3, 1, 1);
    CHECK(most_likely_mode(p, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)) == 0);
    p.r << 0.0, 5.0, 0.0;
    CHECK(most_likely_mode(p, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)) == 1);
    p.r << std::log(3.0), 0.0, -1.0;
    CHECK(most_likely_mode(p, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)) == 0);
}

TEST_CASE("step dynamics: identity and hand arithmetic") {
    HybridSystemParams p = HybridSystemParams::zero(1, 2, 1);
    const Eigen::Vector2d x(0.4, -0.2);
    CHECK((step_dynamics(p, x, Eigen::VectorXd::Zero(1), 0) - x).norm() == 0.0);

    HybridSystemParams scalar = HybridSystemParams::zero(1, 1, 1);
    scalar.A[0] << 0.5;
    scalar.B[0] << 1.0;
    scalar.b[0] << 0.1;
    const Eigen::VectorXd next = step_dynamics(scalar, Eigen::VectorXd::Constant(1, 2.0),
                                               Eigen::VectorXd::Constant(1, 1.0), 0);
    CHECK(next[0] == doctest::Approx(2.1).epsilon(1e-15));
}

TEST_CASE("step dynamics noise is seed-deterministic") {
    HybridSystemParams p = HybridSystemParams::zero(2, 2, 1);
    const Eigen::Vector2d x(0.1, 0.2);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, -0.3);
    const Eigen::VectorXd a = step_dynamics(p, x, u, 1, 99);
    const Eigen::VectorXd b = step_dynamics(p, x, u, 1, 99);
    CHECK((a - b).norm() == 0.0);
    CHECK((a - step_dynamics(p, x, u, 1)).norm() > 0.0);  // noise actually applied
    CHECK_THROWS_AS(step_dynamics(p, x, u, 2), std::domain_error);
    CHECK_THROWS_AS(step_dynamics(p, x, u, -1), std::domain_error);
}

TEST_CASE("simulate: empty rollout, single mode, deterministic chaining") {
    HybridSystemParams p = two_mode_truth();
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, -0.7);

    const Trajectory empty = simulate(p, x0, {});
    CHECK(empty.length() == 1);
    CHECK(empty.states[0] == x0);

    HybridSystemParams single = HybridSystemParams::zero(1, 1, 1);
    single.A[0] << 0.9;
    const Trajectory one = simulate(single, x0, random_controls(50, 3), {true, true, 17});
    for (int z : one.modes) CHECK(z == 0);
    one.validate(1);

    // with noise and sampling off, simulate is plain step_dynamics chaining
    const auto controls = random_controls(30, 4);
    const Trajectory det = simulate(p, x0, controls, {false, false, 0});
    Eigen::VectorXd x = x0;
    int z = most_likely_mode(p, x, controls[0]);
    for (std::size_t t = 0; t < controls.size(); ++t) {
        CHECK((det.states[t] - x).norm() == 0.0);
        CHECK(det.modes[t] == z);
        x = step_dynamics(p, x, controls[t], z);
        z = most_likely_mode(p, x, controls[t]);
    }
    det.validate(2);
}

TEST_CASE("log likelihood hand cases") {
    const double log_two_pi = std::log(2.0 * M_PI);

    // transition exactly on the affine prediction with unit variance
    HybridSystemParams p = HybridSystemParams::zero(1, 2, 1);
    Trajectory traj;
    traj.states = {Eigen::Vector2d(0.5, -0.5), Eigen::Vector2d(0.5, -0.5)};
    traj.controls = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    traj.modes = {0, 0};
    traj.rewards = {0.0, 0.0};
    traj.refresh_switch_flags();
    // K=1: the categorical term is log(1) = 0
    CHECK(log_likelihood(p, traj) == doctest::Approx(-log_two_pi).epsilon(1e-12));

    // M=1 residual 0.5 with variance 0.25
    HybridSystemParams q = HybridSystemParams::zero(1, 1, 1);
    q.Q[0] << 0.25;
    Trajectory t2;
    t2.states = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.5)};
    t2.controls = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    t2.modes = {0, 0};
    t2.rewards = {0.0, 0.0};
    t2.refresh_switch_flags();
    const double expected = -0.5 * std::log(2.0 * M_PI * 0.25) - 0.25 / (2.0 * 0.25);
    CHECK(log_likelihood(q, t2) == doctest::Approx(expected).epsilon(1e-12));

    // a probability-one categorical transition contributes zero
    HybridSystemParams r2 = HybridSystemParams::zero(2, 1, 1);
    r2.r << 200.0, -200.0;  // mode 0 has probability 1 up to rounding
    Trajectory t3 = t2;
    const double with_modes = log_likelihood(r2, t3);
    const double gauss_only = -0.5 * log_two_pi - 0.125;
    CHECK(with_modes == doctest::Approx(gauss_only).epsilon(1e-12));
}

TEST_CASE("log likelihood rejects zero variances") {
    HybridSystemParams p = HybridSystemParams::zero(1, 1, 1);
    Trajectory traj;
    traj.states = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    traj.controls = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    traj.modes = {0, 0};
    traj.rewards = {0.0, 0.0};
    traj.refresh_switch_flags();
    p.Q[0] << 0.0;
    CHECK_THROWS_AS(log_likelihood(p, traj), std::domain_error);
}

TEST_CASE("generating parameters beat perturbed ones on a long trajectory") {
    const HybridSystemParams truth = two_mode_truth();
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Trajectory traj = simulate(truth, Eigen::VectorXd::Constant(1, -0.3),
                                   random_controls(800, 100 + seed), {true, true, seed});
        HybridSystemParams perturbed = truth;
        perturbed.A[0](0, 0) += 0.5;
        if (log_likelihood(truth, traj) >= log_likelihood(perturbed, traj)) ++wins;
    }
    CHECK(wins >= 7);
}

TEST_CASE("softmax regression gradient matches central finite differences") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int K = 2 + rng.uniform_int(3);
        const int D = 1 + rng.uniform_int(3);
        const int n = 30;
        std::vector<Eigen::VectorXd> feats;
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            feats.push_back(Eigen::VectorXd::NullaryExpr(
                D, [&](Eigen::Index) { return rng.uniform(-2.0, 2.0); }));
            labels.push_back(rng.uniform_int(K));
        }
        Eigen::MatrixXd W = Eigen::MatrixXd::NullaryExpr(
            K, D + 1, [&](Eigen::Index, Eigen::Index) { return rng.uniform(-1.0, 1.0); });

        Eigen::MatrixXd grad;
        softmax_regression_objective(W, feats, labels, &grad);

        const double h = 1e-6;
        for (int check = 0; check < 5; ++check) {
            const int i = rng.uniform_int(K);
            const int j = rng.uniform_int(D + 1);
            Eigen::MatrixXd Wp = W, Wm = W;
            Wp(i, j) += h;
            Wm(i, j) -= h;
            const double fd = (softmax_regression_objective(Wp, feats, labels) -
                               softmax_regression_objective(Wm, feats, labels)) /
                              (2.0 * h);
            const double scale = std::max({1e-8, std::abs(fd), std::abs(grad(i, j))});
            CHECK(std::abs(fd - grad(i, j)) / scale < 1e-5);
        }
    }
}

TEST_CASE("fit recovers a single linear system") {
    HybridSystemParams truth = HybridSystemParams::zero(1, 1, 1);
    truth.A[0] << 0.8;
    truth.B[0] << 0.5;
    truth.b[0] << 0.1;
    truth.Q[0] << 1e-4;

    const Trajectory traj = simulate(truth, Eigen::VectorXd::Zero(1),
                                     random_controls(600, 21), {true, true, 5});
    const FitResult result = fit({traj}, 1, {});
    CHECK(std::abs(result.params.A[0](0, 0) - 0.8) < 0.05);
    CHECK(std::abs(result.params.B[0](0, 0) - 0.5) < 0.05);
    CHECK(std::abs(result.params.b[0][0] - 0.1) < 0.05);
}

TEST_CASE("fit recovers a two-mode system up to permutation") {
    const HybridSystemParams truth = two_mode_truth();
    const Trajectory traj = simulate(truth, Eigen::VectorXd::Constant(1, -0.3),
                                     random_controls(2000, 33), {true, true, 9});

    FitOptions opts;
    opts.seed = 1;
    const FitResult result = fit({traj}, 2, opts);
    CHECK(result.active_modes == 2);

    // choose the mode permutation that best matches the true A's
    const double direct = std::max(std::abs(result.params.A[0](0, 0) - 0.9),
                                   std::abs(result.params.A[1](0, 0) - 0.5));
    const double swapped = std::max(std::abs(result.params.A[0](0, 0) - 0.5),
                                    std::abs(result.params.A[1](0, 0) - 0.9));
    const bool swap = swapped < direct;
    CHECK(std::min(direct, swapped) < 0.1);

    int correct = 0;
    for (std::size_t t = 0; t < traj.length(); ++t) {
        int label = result.labels[0][t];
        if (swap) label = 1 - label;
        if (label == traj.modes[t]) ++correct;
    }
    CHECK(static_cast<double>(correct) / traj.length() >= 0.95);
}

TEST_CASE("fit log likelihood is monotone over EM rounds") {
    const HybridSystemParams truth = two_mode_truth();
    const Trajectory traj = simulate(truth, Eigen::VectorXd::Constant(1, 0.2),
                                     random_controls(800, 55), {true, true, 77});
    const FitResult result = fit({traj}, 2, {});
    REQUIRE(result.ll_history.size() >= 2);
    for (std::size_t i = 1; i < result.ll_history.size(); ++i) {
        CHECK(result.ll_history[i] >= result.ll_history[i - 1] - 1e-9);
    }
}

TEST_CASE("fit rejects empty and undersized datasets") {
    CHECK_THROWS_AS(fit({}, 2, {}), std::invalid_argument);
    Trajectory tiny;
    tiny.states = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    tiny.controls = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    CHECK_THROWS_AS(fit({tiny}, 2, {}), std::invalid_argument);
}

TEST_CASE("parameters serialize to JSON and back bit-exactly") {
    HybridSystemParams p = two_mode_truth();
    p.A[0](0, 0) = 1.0 / 3.0;
    p.W_x(1, 0) = M_PI;
    p.r[0] = -1e-17;
    const HybridSystemParams back = params_from_json_string(params_to_json_string(p));
    CHECK(back.num_modes == p.num_modes);
    for (int k = 0; k < p.num_modes; ++k) {
        CHECK(back.A[k] == p.A[k]);
        CHECK(back.B[k] == p.B[k]);
        CHECK(back.b[k] == p.b[k]);
        CHECK(back.Q[k] == p.Q[k]);
    }
    CHECK(back.W_x == p.W_x);
    CHECK(back.W_u == p.W_u);
    CHECK(back.r == p.r);
    CHECK(back.S == p.S);
}
