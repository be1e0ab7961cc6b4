#include "hha/serialize.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace hha {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    if (static_cast<Eigen::Index>(j.size()) != rows) {
        throw std::runtime_error("snapshot: matrix row count mismatch");
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j.at(i);
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw std::runtime_error("snapshot: matrix column count mismatch");
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(c).get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
    return v;
}

json params_to_json(const HybridSystemParams& p) {
    json doc;
    doc["num_modes"] = p.num_modes;
    doc["state_dim"] = p.state_dim;
    doc["control_dim"] = p.control_dim;
    json modes = json::array();
    for (int k = 0; k < p.num_modes; ++k) {
        json mode;
        mode["A"] = matrix_to_json(p.A[k]);
        mode["B"] = matrix_to_json(p.B[k]);
        mode["b"] = vector_to_json(p.b[k]);
        mode["Q"] = vector_to_json(p.Q[k]);
        modes.push_back(std::move(mode));
    }
    doc["modes"] = std::move(modes);
    doc["W_x"] = matrix_to_json(p.W_x);
    doc["W_u"] = matrix_to_json(p.W_u);
    doc["r"] = vector_to_json(p.r);
    doc["S"] = vector_to_json(p.S);
    return doc;
}

HybridSystemParams params_from_json(const json& doc) {
    HybridSystemParams p;
    p.num_modes = doc.at("num_modes").get<int>();
    p.state_dim = doc.at("state_dim").get<int>();
    p.control_dim = doc.at("control_dim").get<int>();
    const json& modes = doc.at("modes");
    for (const json& mode : modes) {
        p.A.push_back(matrix_from_json(mode.at("A"), p.state_dim, p.state_dim));
        p.B.push_back(matrix_from_json(mode.at("B"), p.state_dim, p.control_dim));
        p.b.push_back(vector_from_json(mode.at("b")));
        p.Q.push_back(vector_from_json(mode.at("Q")));
    }
    p.W_x = matrix_from_json(doc.at("W_x"), p.num_modes, p.state_dim);
    p.W_u = matrix_from_json(doc.at("W_u"), p.num_modes, p.control_dim);
    p.r = vector_from_json(doc.at("r"));
    p.S = vector_from_json(doc.at("S"));
    p.validate();
    return p;
}

json policy_to_json(const LqrPolicy& policy) {
    json doc;
    json gains = json::array();
    json offsets = json::array();
    for (int t = 0; t < policy.horizon(); ++t) {
        gains.push_back(matrix_to_json(policy.gains[t]));
        offsets.push_back(vector_to_json(policy.offsets[t]));
    }
    doc["gains"] = std::move(gains);
    doc["offsets"] = std::move(offsets);
    doc["cost_to_go"] = matrix_to_json(policy.cost_to_go);
    return doc;
}

LqrPolicy policy_from_json(const json& doc, int state_dim, int control_dim) {
    LqrPolicy policy;
    const json& gains = doc.at("gains");
    const json& offsets = doc.at("offsets");
    for (std::size_t t = 0; t < gains.size(); ++t) {
        policy.gains.push_back(matrix_from_json(gains.at(t), control_dim, state_dim));
        policy.offsets.push_back(vector_from_json(offsets.at(t)));
    }
    policy.cost_to_go = matrix_from_json(doc.at("cost_to_go"), state_dim + 1, state_dim + 1);
    return policy;
}

}  // namespace

std::string to_json_string(const ModelSnapshot& snapshot) {
    const int K = snapshot.params.num_modes;
    json doc;
    doc["params"] = params_to_json(snapshot.params);

    json adjacency;
    adjacency["num_modes"] = snapshot.adjacency.num_modes;
    json rows = json::array();
    for (int i = 0; i < K; ++i) {
        json row = json::array();
        for (int j = 0; j < K; ++j) row.push_back(snapshot.adjacency.adjacent(i, j));
        rows.push_back(std::move(row));
    }
    adjacency["matrix"] = std::move(rows);
    adjacency["bounds_lower"] = vector_to_json(snapshot.adjacency.bounds.lower);
    adjacency["bounds_upper"] = vector_to_json(snapshot.adjacency.bounds.upper);
    doc["adjacency"] = std::move(adjacency);

    json priors = json::array();
    for (const ControlPrior& prior : snapshot.control_priors) {
        json p;
        p["mode"] = prior.mode;
        p["point"] = vector_to_json(prior.point);
        p["attained_probability"] = prior.attained_probability;
        p["attained"] = prior.attained;
        priors.push_back(std::move(p));
    }
    doc["control_priors"] = std::move(priors);

    json policies = json::array();
    for (const auto& [key, entry] : snapshot.policies) {
        json item;
        item["from"] = key.first;
        item["to"] = key.second;
        item["expected_cost"] = entry.expected_cost;
        item["policy"] = policy_to_json(entry.policy);
        policies.push_back(std::move(item));
    }
    doc["policies"] = std::move(policies);

    doc["dirichlet"] = json{{"num_modes", snapshot.dirichlet.num_modes},
                            {"alpha", snapshot.dirichlet.alpha}};
    doc["goal_prior"] = vector_to_json(snapshot.goal_prior.log_preference);
    return doc.dump(2);
}

ModelSnapshot snapshot_from_json_string(const std::string& text) {
    const json doc = json::parse(text);
    ModelSnapshot snapshot;
    snapshot.params = params_from_json(doc.at("params"));
    const int K = snapshot.params.num_modes;

    const json& adjacency = doc.at("adjacency");
    Bounds bounds;
    bounds.lower = vector_from_json(adjacency.at("bounds_lower"));
    bounds.upper = vector_from_json(adjacency.at("bounds_upper"));
    snapshot.adjacency = AdjacencyMatrix::identity(adjacency.at("num_modes").get<int>(), bounds);
    const json& rows = adjacency.at("matrix");
    for (int i = 0; i < snapshot.adjacency.num_modes; ++i) {
        for (int j = 0; j < snapshot.adjacency.num_modes; ++j) {
            snapshot.adjacency.set(i, j, rows.at(i).at(j).get<bool>());
        }
    }

    for (const json& p : doc.at("control_priors")) {
        ControlPrior prior;
        prior.mode = p.at("mode").get<int>();
        prior.point = vector_from_json(p.at("point"));
        prior.attained_probability = p.at("attained_probability").get<double>();
        prior.attained = p.at("attained").get<bool>();
        snapshot.control_priors.push_back(std::move(prior));
    }

    for (const json& item : doc.at("policies")) {
        lqr::PolicyEntry entry;
        entry.policy = policy_from_json(item.at("policy"), snapshot.params.state_dim,
                                        snapshot.params.control_dim);
        entry.expected_cost = item.at("expected_cost").get<double>();
        snapshot.policies.emplace(
            std::make_pair(item.at("from").get<int>(), item.at("to").get<int>()),
            std::move(entry));
    }

    const json& dirichlet = doc.at("dirichlet");
    snapshot.dirichlet.num_modes = dirichlet.at("num_modes").get<int>();
    snapshot.dirichlet.alpha = dirichlet.at("alpha").get<std::vector<double>>();
    if (snapshot.dirichlet.alpha.size() !=
        static_cast<std::size_t>(K) * static_cast<std::size_t>(K) * static_cast<std::size_t>(K)) {
        throw std::runtime_error("snapshot: dirichlet tensor size mismatch");
    }
    snapshot.goal_prior.log_preference = vector_from_json(doc.at("goal_prior"));
    return snapshot;
}

void save_snapshot(const ModelSnapshot& snapshot, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_snapshot: cannot open " + path);
    out << to_json_string(snapshot) << "\n";
}

ModelSnapshot load_snapshot(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_snapshot: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return snapshot_from_json_string(text);
}

std::string params_to_json_string(const HybridSystemParams& params) {
    return params_to_json(params).dump(2);
}

HybridSystemParams params_from_json_string(const std::string& text) {
    return params_from_json(json::parse(text));
}

}  // namespace hha
