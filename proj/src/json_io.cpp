#include "sparselqr/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sparselqr {

using nlohmann::json;

namespace {

json require_field(const json& j, const std::string& name) {
    if (!j.contains(name)) throw ValidationError(name + ": missing field");
    return j.at(name);
}

MatrixXd parse_matrix(const json& j, const std::string& name, int rows, int cols) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows * cols) {
        throw ValidationError(name + ": expected row-major array of " +
                              std::to_string(rows * cols) + " numbers");
    }
    MatrixXd M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int k = 0; k < cols; ++k) {
            const json& v = j.at(i * cols + k);
            if (!v.is_number()) throw ValidationError(name + ": non-numeric entry");
            M(i, k) = v.get<double>();
        }
    if (!M.allFinite()) throw ValidationError(name + ": non-finite entry");
    return M;
}

}  // namespace

SystemSpec parse_system_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("system file: ") + e.what());
    }

    const int m = require_field(j, "m").is_number_integer() ? j.at("m").get<int>()
                                                            : throw ValidationError("m: expected integer");
    const int q = require_field(j, "q").is_number_integer() ? j.at("q").get<int>()
                                                            : throw ValidationError("q: expected integer");
    if (m < 1) throw ValidationError("m: must be >= 1");
    if (q < 0) throw ValidationError("q: must be >= 0");

    const json jnodes = require_field(j, "nodes");
    if (!jnodes.is_array() || jnodes.empty()) throw ValidationError("nodes: expected nonempty array");
    std::vector<NodeDims> nodes;
    for (const auto& jn : jnodes) {
        NodeDims nd;
        nd.states = require_field(jn, "m_j").get<int>();
        nd.inputs = require_field(jn, "p_j").get<int>();
        nodes.push_back(nd);
    }
    BlockStructure structure(nodes);
    if (structure.total_states() != m) throw ValidationError("nodes: m_j sum does not equal m");
    if (structure.total_inputs() != q) throw ValidationError("nodes: p_j sum does not equal q");

    SystemSpec spec;
    spec.system.structure = structure;
    spec.system.A = parse_matrix(require_field(j, "A"), "A", m, m);
    spec.system.B = parse_matrix(require_field(j, "B"), "B", m, q);
    spec.system.D = parse_matrix(require_field(j, "D"), "D", m, 1);
    spec.system.validate();

    const json jagents = require_field(j, "agents");
    if (!jagents.is_array() || jagents.empty()) throw ValidationError("agents: expected nonempty array");
    for (const auto& a : jagents) {
        if (!a.is_number_integer()) throw ValidationError("agents: expected integer node counts");
        spec.agents.push_back(a.get<int>());
    }
    AgentPartition check(structure, spec.agents);  // throws ValidationError on bad coverage
    (void)check;
    return spec;
}

SystemSpec load_system_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("system file: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_system_json(ss.str());
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string system_to_json(const LtiSystem& sys, const std::vector<int>& agents) {
    sys.validate();
    json j;
    j["m"] = sys.num_states();
    j["q"] = sys.num_inputs();
    json jnodes = json::array();
    for (const auto& nd : sys.structure.nodes()) {
        jnodes.push_back({{"m_j", nd.states}, {"p_j", nd.inputs}});
    }
    j["nodes"] = jnodes;
    j["agents"] = agents;
    auto flat = [](const MatrixXd& M) {
        json arr = json::array();
        for (Eigen::Index i = 0; i < M.rows(); ++i)
            for (Eigen::Index k = 0; k < M.cols(); ++k) arr.push_back(M(i, k));
        return arr;
    };
    j["A"] = flat(sys.A);
    j["B"] = flat(sys.B);
    j["D"] = flat(sys.D);
    return j.dump(2);
}

void save_system_json(const std::string& path, const LtiSystem& sys,
                      const std::vector<int>& agents) {
    std::ofstream out(path);
    if (!out) throw ValidationError("system file: cannot write " + path);
    out << system_to_json(sys, agents) << "\n";
}

}  // namespace sparselqr
