#include "hha/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hha/rng.hpp"

namespace hha {

void EnvConfig::validate() const {
    if (!(position_min < goal_position && goal_position <= position_max)) {
        throw std::invalid_argument("EnvConfig: require position_min < goal_position <= position_max");
    }
    if (!(power > 0.0)) throw std::invalid_argument("EnvConfig: power must be positive");
    if (!(max_speed > 0.0)) throw std::invalid_argument("EnvConfig: max_speed must be positive");
    if (max_episode_steps <= 0) throw std::invalid_argument("EnvConfig: max_episode_steps must be positive");
    if (!(start_min <= start_max)) throw std::invalid_argument("EnvConfig: start interval inverted");
    if (!(start_min >= position_min && start_max <= position_max)) {
        throw std::invalid_argument("EnvConfig: start interval outside track");
    }
}

StepOutcome transition(const EnvState& state, double action, const EnvConfig& cfg) {
    if (!std::isfinite(state.position) || !std::isfinite(state.velocity)) {
        throw std::domain_error("env step: non-finite state");
    }
    if (!std::isfinite(action)) {
        throw std::domain_error("env step: non-finite action");
    }

    const double force = std::clamp(action, -1.0, 1.0);

    double velocity = state.velocity + force * cfg.power - cfg.gravity_coeff * std::cos(3.0 * state.position);
    velocity = std::clamp(velocity, -cfg.max_speed, cfg.max_speed);

    double position = std::clamp(state.position + velocity, cfg.position_min, cfg.position_max);
    if (position <= cfg.position_min && velocity < 0.0) {
        velocity = 0.0;  // left wall pin
    }

    StepOutcome out;
    out.state = EnvState{position, velocity};
    out.goal_reached = position >= cfg.goal_position || state.position >= cfg.goal_position;
    out.reward = -cfg.action_cost_coeff * force * force + (out.goal_reached ? cfg.goal_reward : 0.0);
    return out;
}

MountainCarEnv::MountainCarEnv(const EnvConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    state_ = EnvState{0.5 * (cfg_.start_min + cfg_.start_max), 0.0};
}

EnvState MountainCarEnv::reset(std::uint64_t seed) {
    Rng rng(seed);
    state_ = EnvState{rng.uniform(cfg_.start_min, cfg_.start_max), 0.0};
    steps_ = 0;
    return state_;
}

MountainCarEnv::Step MountainCarEnv::step(double action) {
    const StepOutcome out = transition(state_, action, cfg_);
    state_ = out.state;
    ++steps_;

    Step result;
    result.state = out.state;
    result.reward = out.reward;
    result.goal = out.goal_reached;
    result.done = out.goal_reached || steps_ >= cfg_.max_episode_steps;
    return result;
}

}  // namespace hha
