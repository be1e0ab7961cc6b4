#include "hha/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "hha/rng.hpp"
#include "hha/serialize.hpp"

namespace hha {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& block,
                  std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        const std::string& key = item.key();
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const char* k) { return key == k; })) {
            throw std::runtime_error("config: unknown key '" + key + "' in block '" + block + "'");
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

RunMode run_mode_from_string(const std::string& name) {
    if (name == "hha") return RunMode::Hha;
    if (name == "hha_no_ig") return RunMode::HhaNoIg;
    if (name == "random") return RunMode::Random;
    throw std::runtime_error("config: unknown mode '" + name + "'");
}

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Hha: return "hha";
        case RunMode::HhaNoIg: return "hha_no_ig";
        default: return "random";
    }
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw std::runtime_error("config: seeds must be nonempty");
    if (grid_rows < 2 || grid_cols < 2) throw std::runtime_error("config: grid dims must be >= 2");
    if (total_steps < 0 || n_episodes < 1) throw std::runtime_error("config: bad step counts");
    if (checkpoint_every < 1) throw std::runtime_error("config: checkpoint_every must be >= 1");
    env.validate();
}

ExperimentConfig parse_config_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: invalid JSON: ") + e.what());
    }
    require_keys(doc, "top level", {"experiment", "env", "agent", "planner", "lqr", "fit"});

    ExperimentConfig cfg;
    if (doc.contains("experiment")) {
        const json& ex = doc.at("experiment");
        require_keys(ex, "experiment",
                     {"mode", "total_steps", "n_episodes", "seeds", "grid_rows", "grid_cols",
                      "checkpoint_every", "output_dir", "write_snapshots"});
        if (ex.contains("mode")) cfg.mode = run_mode_from_string(ex.at("mode").get<std::string>());
        read(ex, "total_steps", cfg.total_steps);
        read(ex, "n_episodes", cfg.n_episodes);
        read(ex, "seeds", cfg.seeds);
        read(ex, "grid_rows", cfg.grid_rows);
        read(ex, "grid_cols", cfg.grid_cols);
        read(ex, "checkpoint_every", cfg.checkpoint_every);
        read(ex, "output_dir", cfg.output_dir);
        read(ex, "write_snapshots", cfg.write_snapshots);
    }
    if (doc.contains("env")) {
        const json& env = doc.at("env");
        require_keys(env, "env",
                     {"position_min", "position_max", "max_speed", "goal_position", "power",
                      "gravity_coeff", "goal_reward", "action_cost_coeff", "max_episode_steps",
                      "start_min", "start_max"});
        read(env, "position_min", cfg.env.position_min);
        read(env, "position_max", cfg.env.position_max);
        read(env, "max_speed", cfg.env.max_speed);
        read(env, "goal_position", cfg.env.goal_position);
        read(env, "power", cfg.env.power);
        read(env, "gravity_coeff", cfg.env.gravity_coeff);
        read(env, "goal_reward", cfg.env.goal_reward);
        read(env, "action_cost_coeff", cfg.env.action_cost_coeff);
        read(env, "max_episode_steps", cfg.env.max_episode_steps);
        read(env, "start_min", cfg.env.start_min);
        read(env, "start_max", cfg.env.start_max);
    }
    if (doc.contains("agent")) {
        const json& ag = doc.at("agent");
        require_keys(ag, "agent",
                     {"num_modes", "refit_interval", "reward_refit_threshold", "max_dwell_time",
                      "control_prior_threshold", "goal_preference", "reward_preference_threshold",
                      "bounds_lower", "bounds_upper"});
        read(ag, "num_modes", cfg.agent.num_modes);
        read(ag, "refit_interval", cfg.agent.refit_interval);
        read(ag, "reward_refit_threshold", cfg.agent.reward_refit_threshold);
        read(ag, "max_dwell_time", cfg.agent.max_dwell_time);
        read(ag, "control_prior_threshold", cfg.agent.control_prior_threshold);
        read(ag, "goal_preference", cfg.agent.goal_preference);
        read(ag, "reward_preference_threshold", cfg.agent.reward_preference_threshold);
        if (ag.contains("bounds_lower")) {
            const auto v = ag.at("bounds_lower").get<std::vector<double>>();
            cfg.agent.bounds.lower = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
        }
        if (ag.contains("bounds_upper")) {
            const auto v = ag.at("bounds_upper").get<std::vector<double>>();
            cfg.agent.bounds.upper = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
        }
    }
    if (doc.contains("planner")) {
        const json& pl = doc.at("planner");
        require_keys(pl, "planner",
                     {"horizon", "mc_rollouts", "enumeration_cap", "subgoal_cost_weight",
                      "param_gain_weight", "entropy_weight", "infeasible_cost"});
        read(pl, "horizon", cfg.agent.planner.horizon);
        read(pl, "mc_rollouts", cfg.agent.planner.mc_rollouts);
        read(pl, "enumeration_cap", cfg.agent.planner.enumeration_cap);
        read(pl, "subgoal_cost_weight", cfg.agent.planner.subgoal_cost_weight);
        read(pl, "param_gain_weight", cfg.agent.planner.param_gain_weight);
        read(pl, "entropy_weight", cfg.agent.planner.entropy_weight);
        read(pl, "infeasible_cost", cfg.agent.planner.infeasible_cost);
    }
    if (doc.contains("lqr")) {
        const json& lq = doc.at("lqr");
        require_keys(lq, "lqr", {"terminal_weight", "control_weight", "horizon"});
        read(lq, "terminal_weight", cfg.agent.lqr.terminal_weight);
        read(lq, "control_weight", cfg.agent.lqr.control_weight);
        read(lq, "horizon", cfg.agent.lqr.horizon);
    }
    if (doc.contains("fit")) {
        const json& ft = doc.at("fit");
        require_keys(ft, "fit",
                     {"max_iters", "tol", "ridge_lambda", "variance_floor", "obs_variance",
                      "softmax_learning_rate", "softmax_max_iters", "softmax_grad_tol",
                      "init_window", "min_points_per_mode"});
        read(ft, "max_iters", cfg.agent.fit.max_iters);
        read(ft, "tol", cfg.agent.fit.tol);
        read(ft, "ridge_lambda", cfg.agent.fit.ridge_lambda);
        read(ft, "variance_floor", cfg.agent.fit.variance_floor);
        read(ft, "obs_variance", cfg.agent.fit.obs_variance);
        read(ft, "softmax_learning_rate", cfg.agent.fit.softmax_learning_rate);
        read(ft, "softmax_max_iters", cfg.agent.fit.softmax_max_iters);
        read(ft, "softmax_grad_tol", cfg.agent.fit.softmax_grad_tol);
        read(ft, "init_window", cfg.agent.fit.init_window);
        read(ft, "min_points_per_mode", cfg.agent.fit.min_points_per_mode);
    }

    // state bounds default to the environment box
    if (cfg.agent.bounds.lower.size() == 0) {
        cfg.agent.bounds.lower = Eigen::Vector2d(cfg.env.position_min, -cfg.env.max_speed);
        cfg.agent.bounds.upper = Eigen::Vector2d(cfg.env.position_max, cfg.env.max_speed);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_json(text);
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

CoverageGrid::CoverageGrid(int rows, int cols, const EnvConfig& env)
    : rows_(rows),
      cols_(cols),
      pos_min_(env.position_min),
      pos_max_(env.position_max),
      vel_min_(-env.max_speed),
      vel_max_(env.max_speed),
      cells_(static_cast<std::size_t>(rows) * cols, 0) {}

void CoverageGrid::mark(const EnvState& state) {
    const double px = (state.position - pos_min_) / (pos_max_ - pos_min_);
    const double vx = (state.velocity - vel_min_) / (vel_max_ - vel_min_);
    const int col = std::clamp(static_cast<int>(px * cols_), 0, cols_ - 1);
    const int row = std::clamp(static_cast<int>(vx * rows_), 0, rows_ - 1);
    std::uint8_t& cell = cells_[static_cast<std::size_t>(row) * cols_ + col];
    if (!cell) {
        cell = 1;
        ++visited_count_;
    }
}

double CoverageGrid::fraction() const {
    return static_cast<double>(visited_count_) / static_cast<double>(total_cells());
}

namespace {

Eigen::Vector2d to_vec(const EnvState& s) { return Eigen::Vector2d(s.position, s.velocity); }

AgentConfig effective_agent_config(const ExperimentConfig& cfg, RunMode mode,
                                   std::uint64_t seed) {
    AgentConfig agent = cfg.agent;
    agent.seed = seed;
    if (mode == RunMode::HhaNoIg) {
        agent.planner.param_gain_weight = 0.0;
        agent.planner.entropy_weight = 0.0;
    }
    return agent;
}

struct CsvSinks {
    std::ofstream trajectory;
    std::ofstream coverage;
    std::ofstream reward;
};

std::ofstream open_csv(const std::string& dir, const std::string& name, const char* header) {
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/" + name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("harness: cannot write " + path);
    out << header << "\n";
    return out;
}

void write_trajectory_row(std::ofstream& out, long step, const EnvState& state, double control,
                          int mode, bool replanned, int action, double reward) {
    if (!out.is_open()) return;
    out << step << ',' << format_double(state.position) << ',' << format_double(state.velocity)
        << ',' << format_double(control) << ',' << mode << ',' << (replanned ? 1 : 0) << ','
        << action << ',' << format_double(reward) << "\n";
}

void write_coverage_row(std::ofstream& out, long step, const CoverageGrid& grid) {
    if (!out.is_open()) return;
    out << step << ',' << grid.cells_visited() << ',' << format_double(grid.fraction()) << "\n";
}

void maybe_save_snapshot(const ExperimentConfig& cfg, const Agent& agent, std::uint64_t seed,
                         long& saved_refits) {
    if (!cfg.write_snapshots || cfg.output_dir.empty()) return;
    if (agent.refit_count() == saved_refits) return;
    saved_refits = agent.refit_count();
    save_snapshot(agent.snapshot(), cfg.output_dir + "/model_seed" + std::to_string(seed) +
                                        "_refit" + std::to_string(saved_refits) + ".json");
}

}  // namespace

std::vector<MetricsRecord> run_coverage_experiment(const ExperimentConfig& config) {
    config.validate();
    std::vector<MetricsRecord> records;

    for (const std::uint64_t seed : config.seeds) {
        MetricsRecord metrics;
        metrics.seed = seed;

        MountainCarEnv env(config.env);
        CoverageGrid grid(config.grid_rows, config.grid_cols, config.env);
        const bool use_agent = config.mode != RunMode::Random;

        Agent agent(effective_agent_config(config, config.mode, seed));
        Rng random_rng(derive_seed(seed, 0xAC7));
        long saved_refits = 0;

        CsvSinks sinks;
        if (!config.output_dir.empty()) {
            const std::string tag = "seed" + std::to_string(seed);
            sinks.trajectory = open_csv(config.output_dir, "trajectory_" + tag + ".csv",
                                        "step,position,velocity,control,mode,replanned,action,reward");
            sinks.coverage =
                open_csv(config.output_dir, "coverage_" + tag + ".csv", "step,cells_visited,fraction");
        }

        long episode_index = 0;
        EnvState state = env.reset(derive_seed(seed, 7000 + episode_index));
        if (use_agent) agent.begin_episode(to_vec(state));
        write_trajectory_row(sinks.trajectory, 0, state, 0.0, -1, false, -1, 0.0);
        grid.mark(state);
        metrics.coverage.push_back({0, grid.cells_visited(), grid.fraction()});
        write_coverage_row(sinks.coverage, 0, grid);

        double episode_reward = 0.0;
        for (long step = 1; step <= config.total_steps; ++step) {
            double control = 0.0;
            int mode = -1, action = -1;
            bool replanned = false;
            if (use_agent) {
                const Eigen::VectorXd u = agent.act(to_vec(state));
                control = u[0];
            } else {
                control = random_rng.uniform(-1.0, 1.0);
            }

            const MountainCarEnv::Step out = env.step(control);
            episode_reward += out.reward;
            if (use_agent) {
                agent.observe(to_vec(out.state), out.reward, out.done);
                const AgentStepRecord& rec = agent.log().back();
                mode = rec.mode;
                action = rec.action;
                replanned = rec.replanned;
                if (replanned) ++metrics.planner_events;
                agent.clear_log();
                maybe_save_snapshot(config, agent, seed, saved_refits);
            }
            if (out.reward > 0.0 && metrics.first_reward_step < 0) {
                metrics.first_reward_step = step;
            }

            state = out.state;
            write_trajectory_row(sinks.trajectory, env.steps_taken(), state, control, mode,
                                 replanned, action, out.reward);
            grid.mark(state);

            if (out.done) {
                metrics.episode_rewards.push_back(episode_reward);
                metrics.episode_steps.push_back(env.steps_taken());
                metrics.episode_reached_goal.push_back(out.goal);
                episode_reward = 0.0;
                ++episode_index;
                state = env.reset(derive_seed(seed, 7000 + episode_index));
                if (use_agent) agent.begin_episode(to_vec(state));
                write_trajectory_row(sinks.trajectory, 0, state, 0.0, -1, false, -1, 0.0);
                grid.mark(state);
            }

            if (step % config.checkpoint_every == 0 || step == config.total_steps) {
                metrics.coverage.push_back({step, grid.cells_visited(), grid.fraction()});
                write_coverage_row(sinks.coverage, step, grid);
            }
        }
        metrics.final_coverage = grid.fraction();
        records.push_back(std::move(metrics));
    }

    if (!config.output_dir.empty()) {
        // summary over seeds for this mode
        double best = 0.0, mean = 0.0, sq = 0.0;
        for (const MetricsRecord& m : records) {
            best = std::max(best, m.final_coverage);
            mean += m.final_coverage;
        }
        mean /= static_cast<double>(records.size());
        for (const MetricsRecord& m : records) {
            sq += (m.final_coverage - mean) * (m.final_coverage - mean);
        }
        const double stddev = std::sqrt(sq / static_cast<double>(records.size()));

        std::ofstream out(config.output_dir + "/summary.json");
        out << "{\n  \"mode\": \"" << to_string(config.mode) << "\",\n";
        out << "  \"metric\": \"coverage_fraction\",\n";
        out << "  \"best\": " << format_double(best) << ",\n";
        out << "  \"mean\": " << format_double(mean) << ",\n";
        out << "  \"std\": " << format_double(stddev) << ",\n";
        out << "  \"per_seed\": [";
        for (std::size_t i = 0; i < records.size(); ++i) {
            out << (i ? ", " : "") << format_double(records[i].final_coverage);
        }
        out << "]\n}\n";
    }
    return records;
}

std::vector<MetricsRecord> run_reward_experiment(const ExperimentConfig& config) {
    config.validate();
    std::vector<MetricsRecord> records;

    for (const std::uint64_t seed : config.seeds) {
        MetricsRecord metrics;
        metrics.seed = seed;

        MountainCarEnv env(config.env);
        const bool use_agent = config.mode != RunMode::Random;
        Agent agent(effective_agent_config(config, config.mode, seed));
        Rng random_rng(derive_seed(seed, 0xAC7));
        long saved_refits = 0;

        CsvSinks sinks;
        if (!config.output_dir.empty()) {
            const std::string tag = "seed" + std::to_string(seed);
            sinks.reward = open_csv(config.output_dir, "reward_" + tag + ".csv",
                                    "episode,reward,steps,reached_goal");
            sinks.trajectory = open_csv(config.output_dir, "trajectory_" + tag + ".csv",
                                        "step,position,velocity,control,mode,replanned,action,reward");
        }

        long global_step = 0;
        for (int episode = 0; episode < config.n_episodes; ++episode) {
            EnvState state = env.reset(derive_seed(seed, 7000 + episode));
            if (use_agent) agent.begin_episode(to_vec(state));
            write_trajectory_row(sinks.trajectory, 0, state, 0.0, -1, false, -1, 0.0);

            double episode_reward = 0.0;
            bool reached_goal = false;
            bool done = false;
            while (!done) {
                double control = use_agent ? agent.act(to_vec(state))[0]
                                           : random_rng.uniform(-1.0, 1.0);
                const MountainCarEnv::Step out = env.step(control);
                ++global_step;
                episode_reward += out.reward;
                reached_goal = reached_goal || out.goal;
                int mode = -1, action = -1;
                bool replanned = false;
                if (use_agent) {
                    agent.observe(to_vec(out.state), out.reward, out.done);
                    const AgentStepRecord& rec = agent.log().back();
                    mode = rec.mode;
                    action = rec.action;
                    replanned = rec.replanned;
                    if (replanned) ++metrics.planner_events;
                    agent.clear_log();
                    maybe_save_snapshot(config, agent, seed, saved_refits);
                }
                if (out.reward > 0.0 && metrics.first_reward_step < 0) {
                    metrics.first_reward_step = global_step;
                }
                state = out.state;
                write_trajectory_row(sinks.trajectory, env.steps_taken(), state, control, mode,
                                     replanned, action, out.reward);
                done = out.done;
            }
            metrics.episode_rewards.push_back(episode_reward);
            metrics.episode_steps.push_back(env.steps_taken());
            metrics.episode_reached_goal.push_back(reached_goal);
            if (sinks.reward.is_open()) {
                sinks.reward << episode << ',' << format_double(episode_reward) << ','
                             << env.steps_taken() << ',' << (reached_goal ? 1 : 0) << "\n";
            }
        }
        records.push_back(std::move(metrics));
    }

    if (!config.output_dir.empty()) {
        // per-episode mean/std across seeds
        std::ofstream out(config.output_dir + "/summary.json");
        out << "{\n  \"mode\": \"" << to_string(config.mode) << "\",\n";
        out << "  \"metric\": \"episode_reward\",\n  \"episodes\": [\n";
        for (int episode = 0; episode < config.n_episodes; ++episode) {
            double mean = 0.0, sq = 0.0;
            for (const MetricsRecord& m : records) mean += m.episode_rewards[episode];
            mean /= static_cast<double>(records.size());
            for (const MetricsRecord& m : records) {
                sq += (m.episode_rewards[episode] - mean) * (m.episode_rewards[episode] - mean);
            }
            const double stddev = std::sqrt(sq / static_cast<double>(records.size()));
            out << "    {\"episode\": " << episode << ", \"mean\": " << format_double(mean)
                << ", \"std\": " << format_double(stddev) << "}"
                << (episode + 1 < config.n_episodes ? ",\n" : "\n");
        }
        out << "  ]\n}\n";
    }
    return records;
}

double recompute_coverage_from_trajectory(const std::string& trajectory_csv,
                                          const ExperimentConfig& config) {
    std::ifstream in(trajectory_csv);
    if (!in) throw std::runtime_error("cannot open " + trajectory_csv);
    CoverageGrid grid(config.grid_rows, config.grid_cols, config.env);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');  // step
        std::getline(ss, field, ',');
        const double position = std::stod(field);
        std::getline(ss, field, ',');
        const double velocity = std::stod(field);
        grid.mark(EnvState{position, velocity});
    }
    return grid.fraction();
}

}  // namespace hha
