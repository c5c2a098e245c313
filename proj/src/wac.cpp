#include "sparselqr/wac.hpp"

#include <cmath>
#include <queue>

namespace sparselqr {

int WacLayout::total_states() const {
    int total = 0;
    for (int m : node_states) total += m;
    return total;
}

void WacLayout::validate() const {
    if (node_states.empty()) throw InvalidParamsError("layout: no nodes");
    for (int m : node_states) {
        if (m < 2) throw InvalidParamsError("layout: every node needs angle and frequency states");
    }
}

WacLayout layout_of(const BlockStructure& structure) {
    WacLayout layout;
    for (const auto& nd : structure.nodes()) layout.node_states.push_back(nd.states);
    layout.validate();
    return layout;
}

MatrixXd build_permutation(const WacLayout& layout) {
    layout.validate();
    const int n = layout.num_nodes();
    const int m = layout.total_states();
    MatrixXd P = MatrixXd::Zero(m, m);
    std::vector<int> offset(n, 0);
    for (int j = 1; j < n; ++j) offset[j] = offset[j - 1] + layout.node_states[j - 1];
    for (int j = 0; j < n; ++j) P(j, offset[j]) = 1.0;          // angles
    for (int j = 0; j < n; ++j) P(n + j, offset[j] + 1) = 1.0;  // frequencies
    int row = 2 * n;
    for (int j = 0; j < n; ++j) {
        for (int k = 2; k < layout.node_states[j]; ++k) P(row++, offset[j] + k) = 1.0;
    }
    return P;
}

namespace {

MatrixXd consensus_laplacian(int n) {
    return n * MatrixXd::Identity(n, n) - MatrixXd::Ones(n, n);
}

// Indicator diagonal for the nodes of one agent.
MatrixXd agent_indicator(const AgentPartition& part, int agent, int n) {
    MatrixXd I_i = MatrixXd::Zero(n, n);
    for (int k = 0; k < part.nodes_of(agent); ++k) I_i(part.first_node(agent) + k,
                                                      part.first_node(agent) + k) = 1.0;
    return I_i;
}

}  // namespace

MatrixXd build_social_Q(const WacLayout& layout) {
    layout.validate();
    const int n = layout.num_nodes();
    const int m = layout.total_states();
    const MatrixXd P = build_permutation(layout);
    MatrixXd Qp = MatrixXd::Zero(m, m);
    const MatrixXd L = consensus_laplacian(n);
    Qp.block(0, 0, n, n) = L;
    Qp.block(n, n, n, n) = L;
    Qp.block(2 * n, 2 * n, m - 2 * n, m - 2 * n) = MatrixXd::Identity(m - 2 * n, m - 2 * n);
    MatrixXd Q = P.transpose() * Qp * P;
    return 0.5 * (Q + Q.transpose());
}

MatrixXd build_area_Q(const WacLayout& layout, const AgentPartition& part, int agent) {
    layout.validate();
    const int n = layout.num_nodes();
    const int m = layout.total_states();
    const int n_i = part.nodes_of(agent);
    const MatrixXd I_i = agent_indicator(part, agent, n);
    const MatrixXd I_n = MatrixXd::Identity(n, n);
    const MatrixXd ones = MatrixXd::Ones(n, n);

    MatrixXd L_intra = MatrixXd::Zero(n, n);
    L_intra.block(part.first_node(agent), part.first_node(agent), n_i, n_i) =
        consensus_laplacian(n_i);

    // Half of each boundary-crossing pair energy attributed to this agent.
    // The cross term carries a minus sign (the double-sum expansion fixes it;
    // the quadratic-form tests adjudicate).
    const MatrixXd L_inter =
        0.5 * (n - 2 * n_i) * I_i + 0.5 * n_i * I_n - I_i * ones * (I_n - I_i);

    const MatrixXd L_af = L_intra + L_inter;

    MatrixXd Qp = MatrixXd::Zero(m, m);
    Qp.block(0, 0, n, n) = L_af;
    Qp.block(n, n, n, n) = L_af;
    // remainder-state block: identity on the agent's own x^- states
    int row = 2 * n;
    for (int j = 0; j < n; ++j) {
        const int extra = layout.node_states[j] - 2;
        if (part.agent_of_node(j) == agent) {
            Qp.block(row, row, extra, extra) = MatrixXd::Identity(extra, extra);
        }
        row += extra;
    }

    const MatrixXd P = build_permutation(layout);
    MatrixXd Qi = P.transpose() * Qp * P;
    return 0.5 * (Qi + Qi.transpose());
}

SwingParams SwingParams::ring(int generators, double coupling_strength) {
    if (generators < 2) throw InvalidParamsError("ring: need at least two generators");
    SwingParams p;
    p.inertia.assign(generators, 4.0);
    p.damping.assign(generators, 1.0);
    p.tau.assign(generators, 2.0);
    p.coupling = MatrixXd::Zero(generators, generators);
    for (int j = 0; j < generators; ++j) {
        const int next = (j + 1) % generators;
        p.coupling(j, next) = coupling_strength;
        p.coupling(next, j) = coupling_strength;
    }
    p.grounding = 0.05;
    return p;
}

void SwingParams::validate() const {
    const int n = generators();
    if (n < 1) throw InvalidParamsError("swing: no generators");
    if (static_cast<int>(damping.size()) != n || static_cast<int>(tau.size()) != n) {
        throw InvalidParamsError("swing: parameter vectors disagree in length");
    }
    for (int j = 0; j < n; ++j) {
        if (inertia[j] <= 0.0) throw InvalidParamsError("swing: inertia must be positive");
        if (damping[j] <= 0.0) throw InvalidParamsError("swing: damping must be positive");
        if (tau[j] <= 0.0) throw InvalidParamsError("swing: tau must be positive");
    }
    if (coupling.rows() != n || coupling.cols() != n) {
        throw InvalidParamsError("swing: coupling matrix has wrong dimensions");
    }
    if ((coupling - coupling.transpose()).norm() > 1e-12 * std::max(1.0, coupling.norm())) {
        throw InvalidParamsError("swing: coupling matrix must be symmetric");
    }
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            if (j != k && coupling(j, k) < 0.0) {
                throw InvalidParamsError("swing: coupling entries must be nonnegative");
            }
    if (grounding <= 0.0) throw InvalidParamsError("swing: grounding conductance must be positive");
    if (disturbance_node < 0 || disturbance_node >= n) {
        throw InvalidParamsError("swing: disturbance node out of range");
    }
    // connectivity of the coupling graph
    if (n > 1) {
        std::vector<bool> seen(n, false);
        std::queue<int> frontier;
        frontier.push(0);
        seen[0] = true;
        int count = 1;
        while (!frontier.empty()) {
            const int j = frontier.front();
            frontier.pop();
            for (int k = 0; k < n; ++k) {
                if (!seen[k] && j != k && coupling(j, k) > 0.0) {
                    seen[k] = true;
                    ++count;
                    frontier.push(k);
                }
            }
        }
        if (count != n) throw InvalidParamsError("swing: coupling graph must be connected");
    }
}

LtiSystem synth_power_system(const SwingParams& params) {
    params.validate();
    const int n = params.generators();
    const int m = 3 * n;

    LtiSystem sys;
    std::vector<NodeDims> nodes(n, NodeDims{3, 1});
    sys.structure = BlockStructure(nodes);
    sys.A = MatrixXd::Zero(m, m);
    sys.B = MatrixXd::Zero(m, n);
    sys.D = VectorXd::Zero(m);

    for (int j = 0; j < n; ++j) {
        const int d = 3 * j;      // angle row
        const int w = 3 * j + 1;  // frequency row
        const int e = 3 * j + 2;  // excitation row
        const double twoH = 2.0 * params.inertia[j];

        sys.A(d, w) = 1.0;

        double stiffness = params.grounding;
        for (int k = 0; k < n; ++k) {
            if (k == j) continue;
            stiffness += params.coupling(j, k);
            sys.A(w, 3 * k) = params.coupling(j, k) / twoH;
        }
        sys.A(w, d) = -stiffness / twoH;
        sys.A(w, w) = -params.damping[j] / twoH;
        sys.A(w, e) = 1.0 / twoH;

        sys.A(e, e) = -1.0 / params.tau[j];
        sys.B(e, j) = 1.0 / params.tau[j];
    }
    sys.D(3 * params.disturbance_node + 1) = 1.0;
    sys.validate();
    return sys;
}

WacWeights build_wac_weights(const WacLayout& layout, const AgentPartition& part) {
    WacWeights out;
    const int m = layout.total_states();
    int q = 0;
    for (int i = 0; i < part.num_agents(); ++i) q += part.inputs_of(i);
    out.social = DesignWeights(build_social_Q(layout), MatrixXd::Identity(q, q));
    for (int i = 0; i < part.num_agents(); ++i) {
        out.agents.Q.push_back(build_area_Q(layout, part, i));
        out.agents.R.push_back(MatrixXd::Identity(part.inputs_of(i), part.inputs_of(i)));
    }
    out.agents.certify(out.social, part);
    return out;
}

}  // namespace sparselqr
