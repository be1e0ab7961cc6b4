#pragma once

#include <cstdint>

namespace hha {

struct EnvState {
    double position = 0.0;
    double velocity = 0.0;
};

struct EnvConfig {
    double position_min = -1.2;
    double position_max = 0.6;
    double max_speed = 0.07;
    double goal_position = 0.45;
    double power = 0.0015;
    double gravity_coeff = 0.0025;
    double goal_reward = 100.0;
    double action_cost_coeff = 0.1;
    int max_episode_steps = 200;
    double start_min = -0.6;
    double start_max = -0.4;

    void validate() const;  // throws std::invalid_argument on bad values
};

struct StepOutcome {
    EnvState state;
    double reward = 0.0;
    bool goal_reached = false;
};

// One transition of the hill-climb dynamics. Pure in (state, action, config);
// the action is clipped to [-1, 1] before use. The car is already at the goal
// if state.position >= goal_position, in which case the step stays terminal.
StepOutcome transition(const EnvState& state, double action, const EnvConfig& cfg);

class MountainCarEnv {
public:
    explicit MountainCarEnv(const EnvConfig& cfg = {});

    EnvState reset(std::uint64_t seed);

    struct Step {
        EnvState state;
        double reward = 0.0;
        bool done = false;
        bool goal = false;
    };

    // done on goal or once the step budget is exhausted
    Step step(double action);

    const EnvState& state() const { return state_; }
    const EnvConfig& config() const { return cfg_; }
    int steps_taken() const { return steps_; }

private:
    EnvConfig cfg_;
    EnvState state_;
    int steps_ = 0;
};

}  // namespace hha
