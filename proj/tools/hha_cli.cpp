#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hha/agent.hpp"
#include "hha/harness.hpp"
#include "hha/serialize.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string output_dir;
    std::string mode;
    std::optional<std::uint64_t> seed;
    std::string data_path;      // fit-demo
    std::string snapshot_path;  // inspect
};

hha::ExperimentConfig resolve_config(const CliOptions& opts) {
    hha::ExperimentConfig cfg =
        opts.config_path.empty() ? hha::ExperimentConfig{} : hha::load_config(opts.config_path);
    if (cfg.agent.bounds.lower.size() == 0) {
        cfg.agent.bounds.lower = Eigen::Vector2d(cfg.env.position_min, -cfg.env.max_speed);
        cfg.agent.bounds.upper = Eigen::Vector2d(cfg.env.position_max, cfg.env.max_speed);
    }
    if (!opts.mode.empty()) cfg.mode = hha::run_mode_from_string(opts.mode);
    if (opts.seed) cfg.seeds = {*opts.seed};
    if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
    cfg.validate();
    return cfg;
}

// trajectory CSV rows carry post-step states; episodes restart at step 0.
// Controls shift back one row so controls[t] is the control applied at t.
std::vector<hha::Trajectory> load_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::vector<hha::Trajectory> episodes;
    hha::Trajectory current;
    std::string line;
    std::getline(in, line);  // header

    auto flush = [&]() {
        if (current.states.size() >= 2) {
            current.controls.erase(current.controls.begin());
            current.controls.push_back(Eigen::VectorXd::Zero(1));
            current.rewards.erase(current.rewards.begin());
            current.rewards.push_back(0.0);
            current.modes.assign(current.states.size(), 0);
            current.refresh_switch_flags();
            episodes.push_back(current);
        }
        current = hha::Trajectory{};
    };

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        const long step = std::stol(field);
        std::getline(ss, field, ',');
        const double position = std::stod(field);
        std::getline(ss, field, ',');
        const double velocity = std::stod(field);
        std::getline(ss, field, ',');
        const double control = std::stod(field);
        std::getline(ss, field, ',');  // mode
        std::getline(ss, field, ',');  // replanned
        std::getline(ss, field, ',');  // action
        std::getline(ss, field, ',');
        const double reward = std::stod(field);

        if (step == 0) flush();
        current.states.push_back(Eigen::Vector2d(position, velocity));
        current.controls.push_back(Eigen::VectorXd::Constant(1, control));
        current.rewards.push_back(reward);
    }
    flush();
    return episodes;
}

void print_adjacency(std::ostream& out, const hha::AdjacencyMatrix& adjacency) {
    out << "adjacency (" << adjacency.num_modes << "x" << adjacency.num_modes << "):\n";
    for (int i = 0; i < adjacency.num_modes; ++i) {
        out << "  ";
        for (int j = 0; j < adjacency.num_modes; ++j) {
            out << (adjacency.adjacent(i, j) ? '1' : '.') << ' ';
        }
        out << "\n";
    }
}

int run_fit_demo(const CliOptions& opts) {
    const hha::ExperimentConfig cfg = resolve_config(opts);
    const std::vector<hha::Trajectory> episodes = load_trajectories(opts.data_path);
    if (episodes.empty()) throw std::runtime_error("no usable episodes in " + opts.data_path);

    hha::FitOptions fit_opts = cfg.agent.fit;
    fit_opts.seed = cfg.seeds.front();
    const hha::FitResult result = hha::fit(episodes, cfg.agent.num_modes, fit_opts);

    std::cout << "fit: " << episodes.size() << " episodes, K=" << cfg.agent.num_modes
              << ", iterations=" << result.iterations
              << ", active modes=" << result.active_modes
              << ", log likelihood=" << hha::format_double(result.final_log_likelihood) << "\n";

    const hha::AdjacencyMatrix adjacency =
        hha::extract_adjacency(result.params, cfg.agent.bounds);
    print_adjacency(std::cout, adjacency);

    std::vector<hha::ControlPrior> priors;
    hha::ControlPriorOptions prior_opts;
    prior_opts.threshold = cfg.agent.control_prior_threshold;
    for (int k = 0; k < cfg.agent.num_modes; ++k) {
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(result.params.state_dim);
        int count = 0;
        for (std::size_t i = 0; i < episodes.size(); ++i) {
            for (std::size_t t = 0; t < episodes[i].states.size(); ++t) {
                if (result.labels[i][t] == k) {
                    centroid += episodes[i].states[t];
                    ++count;
                }
            }
        }
        const Eigen::VectorXd init =
            count > 0 ? Eigen::VectorXd(centroid / count) : cfg.agent.bounds.center();
        priors.push_back(hha::control_prior(result.params, k, cfg.agent.bounds, init, prior_opts));
        std::cout << "mode " << k << ": points=" << count
                  << " prior=[" << priors.back().point.transpose() << "]"
                  << " p=" << priors.back().attained_probability
                  << (priors.back().attained ? "" : " (below threshold)") << "\n";
    }

    if (!cfg.output_dir.empty()) {
        hha::ModelSnapshot snapshot;
        snapshot.params = result.params;
        snapshot.adjacency = adjacency;
        snapshot.control_priors = priors;
        snapshot.policies = hha::lqr::cache_policies(result.params, adjacency, priors, cfg.agent.lqr);
        snapshot.dirichlet = hha::planner::init_priors(adjacency);
        snapshot.goal_prior = hha::planner::GoalPrior::uniform(cfg.agent.num_modes);
        std::filesystem::create_directories(cfg.output_dir);
        const std::string path = cfg.output_dir + "/fitted_model.json";
        hha::save_snapshot(snapshot, path);
        std::cout << "snapshot written to " << path << "\n";
    }
    return 0;
}

int run_inspect(const CliOptions& opts) {
    const hha::ModelSnapshot snapshot = hha::load_snapshot(opts.snapshot_path);
    const hha::HybridSystemParams& p = snapshot.params;
    std::cout << "modes: " << p.num_modes << ", state dim: " << p.state_dim
              << ", control dim: " << p.control_dim << "\n";
    for (int k = 0; k < p.num_modes; ++k) {
        const Eigen::VectorXcd eigenvalues = p.A[k].eigenvalues();
        double radius = 0.0;
        for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
            radius = std::max(radius, std::abs(eigenvalues[i]));
        }
        std::cout << "mode " << k << ": spectral radius of A = " << radius
                  << ", |b| = " << p.b[k].norm() << "\n";
    }
    print_adjacency(std::cout, snapshot.adjacency);
    for (const hha::ControlPrior& prior : snapshot.control_priors) {
        std::cout << "prior " << prior.mode << ": [" << prior.point.transpose()
                  << "] p=" << prior.attained_probability
                  << (prior.attained ? "" : " (below threshold)") << "\n";
    }
    std::cout << "cached policies: " << snapshot.policies.size() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid hierarchical agent experiments on Continuous Mountain Car"};
    app.require_subcommand(1);

    CliOptions opts;

    CLI::App* coverage = app.add_subcommand("coverage", "state-space coverage experiment");
    coverage->add_option("--config", opts.config_path, "config JSON path");
    coverage->add_option("--seed", opts.seed, "single seed override");
    coverage->add_option("--out", opts.output_dir, "output directory override");
    coverage->add_option("--mode", opts.mode, "hha | hha_no_ig | random");

    CLI::App* reward = app.add_subcommand("reward", "episodic reward experiment");
    reward->add_option("--config", opts.config_path, "config JSON path");
    reward->add_option("--seed", opts.seed, "single seed override");
    reward->add_option("--out", opts.output_dir, "output directory override");
    reward->add_option("--mode", opts.mode, "hha | hha_no_ig | random");

    CLI::App* fit_demo = app.add_subcommand("fit-demo", "fit a model to a logged trajectory CSV");
    fit_demo->add_option("data", opts.data_path, "trajectory CSV")->required();
    fit_demo->add_option("--config", opts.config_path, "config JSON path");
    fit_demo->add_option("--seed", opts.seed, "fit seed");
    fit_demo->add_option("--out", opts.output_dir, "snapshot output directory");

    CLI::App* inspect = app.add_subcommand("inspect", "print a model snapshot summary");
    inspect->add_option("snapshot", opts.snapshot_path, "snapshot JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (coverage->parsed()) {
            hha::run_coverage_experiment(resolve_config(opts));
            return 0;
        }
        if (reward->parsed()) {
            hha::run_reward_experiment(resolve_config(opts));
            return 0;
        }
        if (fit_demo->parsed()) return run_fit_demo(opts);
        if (inspect->parsed()) return run_inspect(opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
