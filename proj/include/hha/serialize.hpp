#pragma once

#include <string>

#include "hha/hybrid_model.hpp"
#include "hha/lqr.hpp"
#include "hha/partition.hpp"
#include "hha/planner.hpp"

namespace hha {

// Everything the planner/controller stack needs to resume from disk.
struct ModelSnapshot {
    HybridSystemParams params;
    AdjacencyMatrix adjacency;
    std::vector<ControlPrior> control_priors;
    lqr::PolicyTable policies;
    planner::DirichletTransitionModel dirichlet;
    planner::GoalPrior goal_prior;
};

std::string to_json_string(const ModelSnapshot& snapshot);
ModelSnapshot snapshot_from_json_string(const std::string& text);

void save_snapshot(const ModelSnapshot& snapshot, const std::string& path);
ModelSnapshot load_snapshot(const std::string& path);

std::string params_to_json_string(const HybridSystemParams& params);
HybridSystemParams params_from_json_string(const std::string& text);

}  // namespace hha
