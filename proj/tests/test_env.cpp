#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hha/env.hpp"
#include "hha/rng.hpp"

using namespace hha;

TEST_CASE("step matches the hand-evaluated update at the valley") {
    EnvConfig cfg;
    const EnvState s{-0.5, 0.0};
    const StepOutcome out = transition(s, 0.0, cfg);

    const double expected_v = -0.0025 * std::cos(3.0 * -0.5);
    CHECK(out.state.velocity == doctest::Approx(expected_v).epsilon(1e-12));
    CHECK(out.state.velocity == doctest::Approx(-1.76843e-4).epsilon(1e-4));
    CHECK(out.state.position == doctest::Approx(-0.5 + expected_v).epsilon(1e-12));
    CHECK(out.reward == 0.0);
    CHECK_FALSE(out.goal_reached);
}

TEST_CASE("a state at the goal is terminal for any velocity") {
    EnvConfig cfg;
    for (double v : {-0.07, -0.01, 0.0, 0.03}) {
        const StepOutcome out = transition(EnvState{cfg.goal_position, v}, 0.0, cfg);
        CHECK(out.goal_reached);
        CHECK(out.reward == doctest::Approx(cfg.goal_reward));
    }
}

TEST_CASE("left wall pins velocity to zero") {
    EnvConfig cfg;
    const StepOutcome out = transition(EnvState{cfg.position_min, -0.05}, 0.0, cfg);
    CHECK(out.state.position == cfg.position_min);
    CHECK(out.state.velocity == 0.0);
}

TEST_CASE("reset is deterministic in the seed") {
    MountainCarEnv env;
    const EnvState a = env.reset(7);
    const EnvState b = env.reset(7);
    CHECK(a.position == b.position);
    CHECK(a.velocity == 0.0);
    CHECK(b.velocity == 0.0);
    CHECK(a.position >= env.config().start_min);
    CHECK(a.position <= env.config().start_max);
}

TEST_CASE("degenerate start interval gives the exact point") {
    EnvConfig cfg;
    cfg.start_min = -0.5;
    cfg.start_max = -0.5;
    MountainCarEnv env(cfg);
    CHECK(env.reset(123).position == -0.5);
    CHECK(env.reset(999).position == -0.5);
}

TEST_CASE("random rollouts keep the state inside the invariants") {
    EnvConfig cfg;
    MountainCarEnv env(cfg);
    Rng rng(42);
    for (int episode = 0; episode < 20; ++episode) {
        env.reset(episode);
        bool done = false;
        while (!done) {
            const double action = rng.uniform(-1.0, 1.0);
            const auto out = env.step(action);
            CHECK(out.state.position >= cfg.position_min);
            CHECK(out.state.position <= cfg.position_max);
            CHECK(std::abs(out.state.velocity) <= cfg.max_speed);
            if (!out.goal) {
                CHECK(out.reward <= 0.0);
            } else {
                CHECK(out.reward ==
                      doctest::Approx(cfg.goal_reward -
                                      cfg.action_cost_coeff * std::clamp(action, -1.0, 1.0) *
                                          std::clamp(action, -1.0, 1.0)));
            }
            done = out.done;
        }
        CHECK(env.steps_taken() <= cfg.max_episode_steps);
    }
}

TEST_CASE("transition is pure and bit-exact on repeated calls") {
    EnvConfig cfg;
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const EnvState s{rng.uniform(cfg.position_min, cfg.position_max),
                         rng.uniform(-cfg.max_speed, cfg.max_speed)};
        const double a = rng.uniform(-1.0, 1.0);
        const StepOutcome first = transition(s, a, cfg);
        const StepOutcome second = transition(s, a, cfg);
        CHECK(first.state.position == second.state.position);
        CHECK(first.state.velocity == second.state.velocity);
        CHECK(first.reward == second.reward);
    }
}

TEST_CASE("non-finite inputs are rejected") {
    EnvConfig cfg;
    CHECK_THROWS_AS(transition(EnvState{-0.5, 0.0}, std::nan(""), cfg), std::domain_error);
    CHECK_THROWS_AS(transition(EnvState{std::nan(""), 0.0}, 0.0, cfg), std::domain_error);
    CHECK_THROWS_AS(
        transition(EnvState{-0.5, std::numeric_limits<double>::infinity()}, 0.0, cfg),
        std::domain_error);
}

TEST_CASE("bad configs are rejected") {
    EnvConfig cfg;
    cfg.goal_position = cfg.position_max + 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = EnvConfig{};
    cfg.power = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = EnvConfig{};
    cfg.max_episode_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
