#pragma once

#include <vector>

#include "sparselqr/game.hpp"

namespace sparselqr {

struct SweepPoint {
    int s = 0;
    double J_soc = 0.0;                // monotone-corrected social objective
    std::vector<double> J_coupled;     // J_i^C per agent
    double J_coupled_total = 0.0;      // J~^C = sum J_i^C
    bool feasible = true;
};

struct AllocationReport {
    int s = 0;
    double v_soc = 0.0;
    std::vector<double> v;       // selfish payoffs (disagreement point)
    std::vector<double> alpha;   // allocated payoffs
    double xi = 0.0;             // common payoff increase alpha_i - v_i
    std::vector<double> cost_fraction;  // C_i; empty when degenerate
    bool bargaining_success = false;
    bool degenerate = false;     // sum(alpha) <= threshold, C_i undefined
    std::vector<int> negative_payoff_agents;  // agents with v_i < 0
};

// Running minimum over s (nonincreasing correction of a sweep series).
std::vector<std::pair<int, double>> monotone_envelope(
    const std::vector<std::pair<int, double>>& series);

// NBS payoff split and proportional cost shares for one sweep point.
AllocationReport allocate(const std::vector<double>& J_decoupled, const SweepPoint& point);

// Nondecreasing alternative payoffs v_i*(s) from prefix minima of J_i^C.
std::vector<std::vector<double>> star_payoffs(const std::vector<double>& J_decoupled,
                                              const std::vector<SweepPoint>& series);

struct CoalitionValue {
    std::vector<std::vector<int>> partition;  // agent sets
    std::vector<double> values;               // v_rho(S) per coalition
    double total = 0.0;
    bool converged = true;
};

struct CoalitionEfficiencyReport {
    double grand_value = 0.0;  // v_N(N)
    bool grand_converged = true;
    std::vector<CoalitionValue> partitions;
    bool efficient = true;  // grand value >= each partition total (converged ones)
};

// Plays a coalition-level game for every partition rho and checks the
// grand-coalition efficiency inequality.
CoalitionEfficiencyReport coalition_efficiency_check(
    const LtiSystem& sys, const AgentPartition& part, const AgentWeights& aw,
    const std::vector<std::vector<std::vector<int>>>& partitions, int s,
    const GameConfig& cfg, const FeedbackGain& K0);

}  // namespace sparselqr
