#pragma once

#include <optional>
#include <vector>

#include "sparselqr/grasp.hpp"

namespace sparselqr {

enum class GameMode { Selfish, Social };

struct GameConfig {
    GameMode mode = GameMode::Selfish;
    int s = 0;
    std::vector<int> initial_budgets;  // empty: proportional to node counts
    SolverOptions opts = []() {
        SolverOptions o;
        o.eps_polish = 1e-3;
        // Round-robin play needs a stronger barrier than the centralized
        // solver: with a nearly flat objective valley the players' block
        // Newton steps zigzag along it and the round limit runs out before
        // the step-norm criterion fires.  run_game escalates this further
        // when an attempt fails to converge.
        o.gramian_shift = 1e-6;
        return o;
    }();
    int max_rounds = 300;
};

struct BroadcastRecord {
    int round = 0;  // 0 marks the initial strategy announcement
    int player = 0;
    std::vector<int> rows;  // global K rows owned by the player
    std::vector<std::tuple<int, int, double>> triplets;  // nonzeros of K^i
    std::vector<std::pair<int, int>> support_added;
    std::vector<std::pair<int, int>> support_removed;
    int card_off_contribution = 0;
    bool prune_reverted = false;
};

struct GameResult {
    FeedbackGain K;
    std::vector<double> J_players;  // selfish: J_i; social: the common J
    double J_social = 0.0;          // set in social mode
    int rounds = 0;
    bool converged = false;
    // Worst per-player projected gradient of the exact objectives on the
    // final supports, divided by sqrt(q*m); the basic-feasibility measure.
    double projected_gradient = 0.0;
    std::vector<int> final_budgets;
    std::vector<BroadcastRecord> broadcast_log;
};

// A (super-)player: the set of nodes it owns, plus its quadratic weights.
// For selfish play Q/R are the player's own design pair; in social mode they
// are ignored.
struct PlayerSpec {
    std::vector<int> nodes;
    MatrixXd Q;  // m x m
    MatrixXd R;  // rows x rows
};

std::vector<PlayerSpec> players_from_agents(const AgentPartition& part, const AgentWeights& aw);

// Merges agents into coalition super-players; Q sums member weights, R is the
// block-diagonal of member weights in member order.
std::vector<PlayerSpec> coalition_players(const AgentPartition& part, const AgentWeights& aw,
                                          const std::vector<std::vector<int>>& coalitions);

// Round-robin best-response engine (gradient support expansion, restricted
// Newton, per-player pruning), then per-player polishing.
GameResult run_game(const LtiSystem& sys, const std::vector<PlayerSpec>& players,
                    const DesignWeights* social_weights, const GameConfig& cfg,
                    const FeedbackGain& K0);

GameResult coupled_nash(const LtiSystem& sys, const AgentPartition& part, const AgentWeights& aw,
                        const GameConfig& cfg, const FeedbackGain& K0);

GameResult social_game(const LtiSystem& sys, const AgentPartition& part, const DesignWeights& w,
                       const GameConfig& cfg, const FeedbackGain& K0);

// s = 0 game: polishing only, supports frozen to each player's diagonal
// blocks.  When K0 is absent a block-diagonal initial gain is derived from
// the summed agent weights.
GameResult decoupled_nash(const LtiSystem& sys, const AgentPartition& part, const AgentWeights& aw,
                          const SolverOptions& opts, const FeedbackGain* K0 = nullptr);

// Rebuilds the gain by applying the log records in order.
FeedbackGain replay_broadcast_log(const std::vector<BroadcastRecord>& log,
                                  const BlockStructure& structure);

}  // namespace sparselqr
