#pragma once

#include <vector>

#include "sparselqr/lqr_objective.hpp"

namespace sparselqr {

// Per-node state order: angle, frequency, then the remaining m_j - 2 states.
struct WacLayout {
    std::vector<int> node_states;  // m_j, each >= 2

    int num_nodes() const { return static_cast<int>(node_states.size()); }
    int total_states() const;
    void validate() const;
};

// Permutation stacking all angles, then all frequencies, then the remaining
// states in node order.
MatrixXd build_permutation(const WacLayout& layout);

// Consensus weight: pairwise angle/frequency differences plus the energy of
// the remaining states.
MatrixXd build_social_Q(const WacLayout& layout);

// Area weight Q_i: intra-area consensus plus half of each boundary-crossing
// pair energy.  Symmetric PSD; the Q_i sum to the social Q.
MatrixXd build_area_Q(const WacLayout& layout, const AgentPartition& part, int agent);

// Synthetic third-order multimachine swing model.
struct SwingParams {
    std::vector<double> inertia;   // H_j > 0, seconds
    std::vector<double> damping;   // d_j > 0, pu
    std::vector<double> tau;       // excitation time constants, seconds
    MatrixXd coupling;             // symmetric, nonnegative off-diagonal, connected
    double grounding = 0.05;       // eps_g > 0, removes the rotational zero mode
    int disturbance_node = 0;      // impulse enters this generator's acceleration row

    // Uniform machines on a ring: H=4, d=1, ring coupling 1, eps_g=0.05, tau=2.
    static SwingParams ring(int generators, double coupling_strength = 1.0);

    void validate() const;
    int generators() const { return static_cast<int>(inertia.size()); }
};

LtiSystem synth_power_system(const SwingParams& params);

// Full WAC weight set for a generated or loaded system: social (Q, I) plus
// certified per-area pairs (Q_i, I).
struct WacWeights {
    DesignWeights social;
    AgentWeights agents;
};
WacWeights build_wac_weights(const WacLayout& layout, const AgentPartition& part);

WacLayout layout_of(const BlockStructure& structure);

}  // namespace sparselqr
