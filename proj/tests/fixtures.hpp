// Shared test fixtures: small random systems over a node-block grid.
#pragma once

#include <random>
#include <vector>

#include "oracles.hpp"
#include "sparselqr/wac.hpp"

namespace fixtures {

using namespace sparselqr;

inline LtiSystem random_system(std::mt19937& rng, const std::vector<NodeDims>& nodes,
                               bool stable = true) {
    LtiSystem sys;
    sys.structure = BlockStructure(nodes);
    const int m = sys.structure.total_states();
    const int q = sys.structure.total_inputs();
    sys.A = stable ? oracles::random_stable(rng, m) : oracles::random_matrix(rng, m, m);
    sys.B = oracles::random_matrix(rng, m, q);
    sys.D = oracles::random_matrix(rng, m, 1);
    sys.validate();
    return sys;
}

// Two-node system whose A and B are block-diagonal (fully decoupled plants).
inline LtiSystem decoupled_two_node(std::mt19937& rng, int m1, int p1, int m2, int p2) {
    LtiSystem sys;
    sys.structure = BlockStructure({NodeDims{m1, p1}, NodeDims{m2, p2}});
    const int m = m1 + m2, q = p1 + p2;
    sys.A = MatrixXd::Zero(m, m);
    sys.B = MatrixXd::Zero(m, q);
    sys.A.block(0, 0, m1, m1) = oracles::random_stable(rng, m1);
    sys.A.block(m1, m1, m2, m2) = oracles::random_stable(rng, m2);
    sys.B.block(0, 0, m1, p1) = oracles::random_matrix(rng, m1, p1);
    sys.B.block(m1, p1, m2, p2) = oracles::random_matrix(rng, m2, p2);
    sys.D = oracles::random_matrix(rng, m, 1);
    sys.validate();
    return sys;
}

inline DesignWeights random_weights(std::mt19937& rng, const LtiSystem& sys) {
    return DesignWeights(oracles::random_spd(rng, sys.num_states()),
                         oracles::random_spd(rng, sys.num_inputs(), 0.5));
}

// Synthetic multimachine system plus agent partition and certified weights.
struct WacFixture {
    LtiSystem sys;
    AgentPartition part;
    WacWeights weights;
};

inline WacFixture wac_fixture(int generators, const std::vector<int>& agents) {
    WacFixture f;
    f.sys = synth_power_system(SwingParams::ring(generators));
    f.part = AgentPartition(f.sys.structure, agents);
    f.weights = build_wac_weights(layout_of(f.sys.structure), f.part);
    return f;
}

}  // namespace fixtures
