#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hha/agent.hpp"
#include "hha/env.hpp"

namespace hha {

enum class RunMode { Hha, HhaNoIg, Random };

RunMode run_mode_from_string(const std::string& name);
std::string to_string(RunMode mode);

struct ExperimentConfig {
    RunMode mode = RunMode::Hha;
    int total_steps = 10000;  // coverage runs
    int n_episodes = 20;      // reward runs
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    int grid_rows = 50;  // velocity axis
    int grid_cols = 50;  // position axis
    int checkpoint_every = 100;
    std::string output_dir = ".";
    bool write_snapshots = true;
    EnvConfig env;
    AgentConfig agent;

    void validate() const;
};

// strict parse: unknown keys anywhere are an error
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& text);

struct CoverageCheckpoint {
    long step = 0;
    long cells_visited = 0;
    double fraction = 0.0;
};

struct MetricsRecord {
    std::uint64_t seed = 0;
    std::vector<double> episode_rewards;
    std::vector<int> episode_steps;
    std::vector<bool> episode_reached_goal;
    std::vector<CoverageCheckpoint> coverage;
    double final_coverage = 0.0;
    long first_reward_step = -1;  // first step with positive env reward
    long planner_events = 0;      // replan count over the run
};

// occupancy over the position x velocity box
class CoverageGrid {
public:
    CoverageGrid(int rows, int cols, const EnvConfig& env);
    void mark(const EnvState& state);
    long cells_visited() const { return visited_count_; }
    double fraction() const;
    long total_cells() const { return static_cast<long>(rows_) * cols_; }

private:
    int rows_, cols_;
    double pos_min_, pos_max_, vel_min_, vel_max_;
    std::vector<std::uint8_t> cells_;
    long visited_count_ = 0;
};

// One continuous run of total_steps (episodes chained through resets),
// tracking grid coverage. Writes coverage_seed<N>.csv and
// trajectory_seed<N>.csv when output_dir is set on the config.
std::vector<MetricsRecord> run_coverage_experiment(const ExperimentConfig& config);

// n_episodes episodes per seed with a persistent agent; writes
// reward_seed<N>.csv per seed.
std::vector<MetricsRecord> run_reward_experiment(const ExperimentConfig& config);

// fraction of grid cells visited along a trajectory CSV written by the
// harness; used as an independent check of the logged coverage numbers
double recompute_coverage_from_trajectory(const std::string& trajectory_csv,
                                          const ExperimentConfig& config);

std::string format_double(double value);  // 17 significant digits

}  // namespace hha
