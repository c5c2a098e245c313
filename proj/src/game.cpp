#include "sparselqr/game.hpp"

#include <cmath>
#include <memory>

namespace sparselqr {

namespace {

std::vector<int> input_rows_of_nodes(const BlockStructure& structure,
                                     const std::vector<int>& nodes) {
    std::vector<int> rows;
    for (int node : nodes) {
        if (node < 0 || node >= structure.num_nodes()) {
            throw InvalidParamsError("player: node index out of range");
        }
        for (int k = 0; k < structure.nodes()[node].inputs; ++k) {
            rows.push_back(structure.input_offset(node) + k);
        }
    }
    return rows;
}

std::vector<int> proportional_budgets(const std::vector<PlayerSpec>& players, int s) {
    int total_nodes = 0;
    for (const auto& p : players) total_nodes += static_cast<int>(p.nodes.size());
    std::vector<int> budgets(players.size(), 0);
    int assigned = 0;
    for (std::size_t i = 0; i < players.size(); ++i) {
        budgets[i] = static_cast<int>(
            static_cast<long>(s) * static_cast<long>(players[i].nodes.size()) / total_nodes);
        assigned += budgets[i];
    }
    for (std::size_t i = 0; assigned < s; i = (i + 1) % players.size()) {
        ++budgets[i];
        ++assigned;
    }
    return budgets;
}

int player_card_off(const MatrixXd& K, const BlockStructure& structure,
                    const std::vector<int>& rows) {
    int count = 0;
    for (int r : rows)
        for (int c = 0; c < K.cols(); ++c)
            if (!structure.is_diag_entry(r, c) && std::abs(K(r, c)) > kNumericalZero) ++count;
    return count;
}

MatrixXd prune_player_rows(const MatrixXd& K, const BlockStructure& structure,
                           const std::vector<int>& rows, int budget) {
    MatrixXd slice = MatrixXd::Zero(K.rows(), K.cols());
    for (int r : rows) slice.row(r) = K.row(r);
    const MatrixXd pruned = prune_off_entries(slice, structure, budget);
    MatrixXd out = K;
    for (int r : rows) out.row(r) = pruned.row(r);
    return out;
}

BroadcastRecord make_record(int round, int player, const std::vector<int>& rows,
                            const MatrixXd& K, const SupportSet& prev_support,
                            const BlockStructure& structure) {
    BroadcastRecord rec;
    rec.round = round;
    rec.player = player;
    rec.rows = rows;
    SupportSet now;
    for (int r : rows)
        for (int c = 0; c < K.cols(); ++c)
            if (std::abs(K(r, c)) > kNumericalZero) {
                rec.triplets.emplace_back(r, c, K(r, c));
                now.insert(r, c);
                if (!structure.is_diag_entry(r, c)) ++rec.card_off_contribution;
            }
    for (const auto& e : now.entries())
        if (!prev_support.contains(e.first, e.second)) rec.support_added.push_back(e);
    for (const auto& e : prev_support.entries())
        if (!now.contains(e.first, e.second)) rec.support_removed.push_back(e);
    return rec;
}

SupportSet player_support(const MatrixXd& K, const std::vector<int>& rows) {
    SupportSet out;
    for (int r : rows)
        for (int c = 0; c < K.cols(); ++c)
            if (std::abs(K(r, c)) > kNumericalZero) out.insert(r, c);
    return out;
}

// One objective per player, sharing the social objective in potential-game
// mode.
struct GameObjectives {
    std::unique_ptr<SocialObjective> social;
    std::vector<std::unique_ptr<RowSliceObjective>> per_player;

    RowSliceObjective* operator[](std::size_t i) { return per_player[i].get(); }
};

GameObjectives build_objectives(const LtiSystem& sys, const std::vector<PlayerSpec>& players,
                                const DesignWeights* social_weights, GameMode mode,
                                const MatrixXd& K0, double gramian_shift) {
    GameObjectives out;
    if (mode == GameMode::Social) {
        if (social_weights == nullptr) {
            throw InvalidParamsError("run_game: social mode requires design weights");
        }
        out.social = std::make_unique<SocialObjective>(sys, *social_weights, gramian_shift);
    }
    for (const auto& p : players) {
        auto rows = input_rows_of_nodes(sys.structure, p.nodes);
        if (mode == GameMode::Social) {
            out.per_player.push_back(
                std::make_unique<RowRestrictedObjective>(*out.social, rows, K0));
        } else {
            if (p.Q.rows() != sys.num_states() || p.Q.cols() != sys.num_states() ||
                p.R.rows() != static_cast<Eigen::Index>(rows.size())) {
                throw InvalidParamsError("run_game: player weight dimensions are wrong");
            }
            out.per_player.push_back(
                std::make_unique<PlayerObjective>(sys, rows, p.Q, p.R, K0, gramian_shift));
        }
    }
    return out;
}

// Round-robin polishing on frozen supports; one Newton step per player per
// round.  Appends a broadcast record after every accepted move.
bool polish_rounds(std::vector<std::unique_ptr<RowSliceObjective>>& objs,
                   const std::vector<std::vector<int>>& rows, MatrixXd& K,
                   const std::vector<SupportSet>& supports, double scale,
                   const SolverOptions& opts, int max_rounds, int round_offset,
                   const BlockStructure& structure, std::vector<BroadcastRecord>& log,
                   int* rounds_used) {
    const int r = static_cast<int>(objs.size());
    for (int round = 0; round < max_rounds; ++round) {
        bool all_met = true;
        bool any_moved = false;
        for (int i = 0; i < r; ++i) {
            if (supports[i].empty()) continue;
            objs[i]->set_fixed(K);
            MatrixXd V = objs[i]->extract(K);
            const MatrixXd pg = supports[i].mask(objs[i]->gradient(V));
            if (pg.norm() / scale < opts.eps_polish) continue;
            all_met = false;
            const SupportSet prev = player_support(K, rows[i]);
            try {
                const MatrixXd dV = restricted_newton_step(*objs[i], V, supports[i], opts.newton);
                const double lambda =
                    armijo_search(*objs[i], V, objs[i]->value(V), pg, dV, opts.armijo);
                V += lambda * dV;
                K = objs[i]->embed(V);
                any_moved = true;
                log.push_back(make_record(round_offset + round + 1, i, rows[i], K, prev, structure));
            } catch (const SolverError&) {
                // stalled on this support; other players may still move
            }
        }
        if (rounds_used) *rounds_used = round + 1;
        if (all_met) return true;
        if (!any_moved) return false;  // no progress possible
    }
    // verify the exit condition once more after the final round
    for (int i = 0; i < r; ++i) {
        if (supports[i].empty()) continue;
        objs[i]->set_fixed(K);
        const MatrixXd pg = supports[i].mask(objs[i]->gradient(objs[i]->extract(K)));
        if (pg.norm() / scale >= opts.eps_polish) return false;
    }
    return true;
}

bool same_support(const MatrixXd& A, const MatrixXd& B) {
    for (int i = 0; i < A.rows(); ++i) {
        for (int j = 0; j < A.cols(); ++j) {
            if ((std::abs(A(i, j)) > kNumericalZero) != (std::abs(B(i, j)) > kNumericalZero)) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

std::vector<PlayerSpec> players_from_agents(const AgentPartition& part, const AgentWeights& aw) {
    std::vector<PlayerSpec> players;
    for (int i = 0; i < part.num_agents(); ++i) {
        PlayerSpec p;
        for (int k = 0; k < part.nodes_of(i); ++k) p.nodes.push_back(part.first_node(i) + k);
        p.Q = aw.Q[i];
        p.R = aw.R[i];
        players.push_back(std::move(p));
    }
    return players;
}

std::vector<PlayerSpec> coalition_players(const AgentPartition& part, const AgentWeights& aw,
                                          const std::vector<std::vector<int>>& coalitions) {
    std::vector<bool> seen(part.num_agents(), false);
    std::vector<PlayerSpec> players;
    for (const auto& members : coalitions) {
        if (members.empty()) throw InvalidParamsError("coalition: empty member set");
        PlayerSpec p;
        int inputs = 0;
        for (int a : members) {
            if (a < 0 || a >= part.num_agents() || seen[a]) {
                throw InvalidParamsError("coalition: invalid or repeated agent index");
            }
            seen[a] = true;
            inputs += part.inputs_of(a);
        }
        p.Q = MatrixXd::Zero(aw.Q[0].rows(), aw.Q[0].cols());
        p.R = MatrixXd::Zero(inputs, inputs);
        int off = 0;
        for (int a : members) {
            for (int k = 0; k < part.nodes_of(a); ++k) p.nodes.push_back(part.first_node(a) + k);
            p.Q += aw.Q[a];
            const int n = part.inputs_of(a);
            p.R.block(off, off, n, n) = aw.R[a];
            off += n;
        }
        players.push_back(std::move(p));
    }
    for (int a = 0; a < part.num_agents(); ++a) {
        if (!seen[a]) throw InvalidParamsError("coalition: agent left unassigned");
    }
    return players;
}

namespace {

GameResult run_game_attempt(const LtiSystem& sys, const std::vector<PlayerSpec>& players,
                            const DesignWeights* social_weights, const GameConfig& cfg,
                            const FeedbackGain& K0) {
    if (cfg.s < 0) throw InvalidParamsError("run_game: s must be >= 0");
    const int r = static_cast<int>(players.size());
    if (r == 0) throw InvalidParamsError("run_game: no players");
    const BlockStructure& structure = sys.structure;
    const double scale = std::sqrt(static_cast<double>(sys.num_inputs()) * sys.num_states());

    std::vector<std::vector<int>> rows;
    for (const auto& p : players) rows.push_back(input_rows_of_nodes(structure, p.nodes));

    MatrixXd K = K0.K;
    if (spectral_abscissa(sys.A - sys.B * K) >= -cfg.opts.stability_margin) {
        throw NoStabilizingInitError("run_game: K0 does not stabilize");
    }

    std::vector<int> budgets =
        cfg.initial_budgets.empty() ? proportional_budgets(players, cfg.s) : cfg.initial_budgets;
    if (static_cast<int>(budgets.size()) != r) {
        throw InvalidParamsError("run_game: one budget per player required");
    }
    int budget_sum = 0;
    for (int b : budgets) {
        if (b < 0) throw InvalidParamsError("run_game: negative player budget");
        budget_sum += b;
    }
    if (budget_sum != cfg.s) throw InvalidParamsError("run_game: budgets must sum to s");

    // enforce per-player cardinality at entry
    for (int i = 0; i < r; ++i) {
        if (player_card_off(K, structure, rows[i]) > budgets[i]) {
            K = prune_player_rows(K, structure, rows[i], budgets[i]);
        }
    }
    if (spectral_abscissa(sys.A - sys.B * K) >= -cfg.opts.stability_margin) {
        throw NoStabilizingIterateError("run_game: pruned K0 does not stabilize");
    }

    GameResult res;
    auto objs = build_objectives(sys, players, social_weights, cfg.mode, K, cfg.opts.gramian_shift);

    for (int i = 0; i < r; ++i) {
        res.broadcast_log.push_back(make_record(0, i, rows[i], K, SupportSet(), structure));
    }

    bool step2_converged = false;
    int round = 0;
    for (; round < cfg.max_rounds && !step2_converged; ++round) {
        const MatrixXd Kprev = K;
        for (int i = 0; i < r; ++i) {
            // Budget release rule: a mover may claim whatever the others do
            // not currently use.  The first player keeps its assigned budget
            // in the opening round; afterwards every player recomputes, which
            // keeps the global cardinality at or below s after every move.
            if (round > 0 || i > 0) {
                int others = 0;
                for (int j = 0; j < r; ++j)
                    if (j != i) others += player_card_off(K, structure, rows[j]);
                budgets[i] = std::max(0, cfg.s - others);
            }
            objs[i]->set_fixed(K);
            MatrixXd V = objs[i]->extract(K);
            const SupportSet prev = player_support(K, rows[i]);

            const MatrixXd g_full = [&] {
                MatrixXd full = MatrixXd::Zero(K.rows(), K.cols());
                const MatrixXd g = objs[i]->gradient(V);
                for (std::size_t k = 0; k < rows[i].size(); ++k) full.row(rows[i][k]) = g.row(k);
                return full;
            }();
            const SupportSet Z_full = SupportSet::nonzeros(
                prune_off_entries(g_full, structure, 2 * budgets[i]));
            // translate to the player's local row coordinates
            SupportSet T;
            for (std::size_t k = 0; k < rows[i].size(); ++k) {
                for (int c = 0; c < K.cols(); ++c) {
                    if (Z_full.contains(rows[i][k], c) || std::abs(V(k, c)) > kNumericalZero) {
                        T.insert(static_cast<int>(k), c);
                    }
                }
            }
            const MatrixXd V0 = V;
            MatrixXd dV = MatrixXd::Zero(V.rows(), V.cols());
            if (!T.empty()) {
                try {
                    const MatrixXd g = objs[i]->gradient(V);
                    dV = restricted_newton_step(*objs[i], V, T, cfg.opts.newton);
                    const double lambda =
                        armijo_search(*objs[i], V, objs[i]->value(V), T.mask(g), dV,
                                      cfg.opts.armijo);
                    V += lambda * dV;
                    dV *= lambda;
                } catch (const SolverError&) {
                    // stalled player keeps its strategy this turn
                    dV.setZero();
                }
            }
            const auto prune_candidate = [&](const MatrixXd& Vc) {
                MatrixXd Kc = objs[i]->embed(Vc);
                return prune_player_rows(Kc, structure, rows[i], budgets[i]);
            };
            // A pruned step is only kept when it is stable and does not make
            // the mover worse off than the incumbent strategy.  The incumbent
            // always fits the current budget (global cardinality never
            // exceeds s), so its own value is the reference.
            const double J_ref = objs[i]->value(V0);
            const auto acceptable = [&](const MatrixXd& Kc) {
                if (spectral_abscissa(sys.A - sys.B * Kc) >= -cfg.opts.stability_margin) {
                    return false;
                }
                MatrixXd Vc(V0.rows(), V0.cols());
                for (std::size_t k = 0; k < rows[i].size(); ++k) Vc.row(k) = Kc.row(rows[i][k]);
                return objs[i]->value(Vc) <= J_ref;
            };
            MatrixXd K_candidate = prune_candidate(V);
            bool reverted = false;
            if (acceptable(K_candidate)) {
                K = K_candidate;
            } else {
                // Pruning the full step can destabilize or undo the step's
                // decrease even though the step itself did neither.  Shrink
                // the step and re-prune before giving up on this turn;
                // shorter steps keep more of the incumbent support and
                // usually survive pruning.
                reverted = true;
                double shrink = cfg.opts.armijo.shrink;
                for (int k = 0; k < cfg.opts.armijo.max_backtracks && dV.norm() > 0.0; ++k) {
                    const MatrixXd Kc = prune_candidate(V0 + shrink * dV);
                    if (acceptable(Kc)) {
                        K = Kc;
                        reverted = false;
                        break;
                    }
                    shrink *= cfg.opts.armijo.shrink;
                }
            }
            auto rec = make_record(round + 1, i, rows[i], K, prev, structure);
            rec.prune_reverted = reverted;
            res.broadcast_log.push_back(std::move(rec));
        }
        if ((K - Kprev).norm() < cfg.opts.eps_abs * scale + cfg.opts.eps_rel * Kprev.norm()) {
            step2_converged = true;
        } else if (same_support(K, Kprev)) {
            // Secondary stop: the supports have settled and every player
            // already meets the polishing exit criterion.  Block-coordinate
            // refinement on a shared support can shrink the iterate change
            // arbitrarily slowly, so waiting for the step-norm criterion
            // alone would burn the round budget without improving the answer.
            bool all_met = true;
            for (int i = 0; i < r && all_met; ++i) {
                objs[i]->set_fixed(K);
                const MatrixXd V = objs[i]->extract(K);
                MatrixXd pg = objs[i]->gradient(V);
                for (int a = 0; a < pg.rows(); ++a) {
                    for (int c = 0; c < pg.cols(); ++c) {
                        if (std::abs(V(a, c)) <= kNumericalZero) pg(a, c) = 0.0;
                    }
                }
                if (pg.norm() / scale >= cfg.opts.eps_polish) all_met = false;
            }
            if (all_met) step2_converged = true;
        }
    }

    // frozen supports in each player's local row coordinates
    std::vector<SupportSet> supports(r);
    for (int i = 0; i < r; ++i) {
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            for (int c = 0; c < K.cols(); ++c) {
                if (std::abs(K(rows[i][k], c)) > kNumericalZero) {
                    supports[i].insert(static_cast<int>(k), c);
                }
            }
        }
    }
    int polish_rounds_used = 0;
    bool polished = polish_rounds(objs.per_player, rows, K, supports, scale, cfg.opts, cfg.max_rounds,
                                  round, structure, res.broadcast_log, &polish_rounds_used);

    // Where the barrier actively props the iterates, the shifted equilibrium
    // is not exactly stationary for the players' true objectives.  A final
    // polishing pass on the unshifted objectives restores the per-player
    // feasibility criterion on the frozen supports.
    auto exact = build_objectives(sys, players, social_weights, cfg.mode, K, 0.0);
    const auto worst_exact_pg = [&](const MatrixXd& Kc) {
        double worst = 0.0;
        for (int i = 0; i < r; ++i) {
            if (supports[i].empty()) continue;
            exact[i]->set_fixed(Kc);
            const MatrixXd pg = supports[i].mask(exact[i]->gradient(exact[i]->extract(Kc)));
            worst = std::max(worst, pg.norm() / scale);
        }
        return worst;
    };
    double pg_final = worst_exact_pg(K);
    if (cfg.opts.gramian_shift > 0.0 && pg_final >= cfg.opts.eps_polish) {
        // The shifted equilibrium need not be exactly stationary for the
        // players' true objectives.  Run a short polishing pass on the
        // unshifted objectives, and keep it only if it actually improves
        // the feasibility measure: without the barrier the round-robin can
        // wander along flat directions instead of settling.
        const MatrixXd K_before = K;
        int extra_rounds = 0;
        std::vector<BroadcastRecord> extra_log;
        polish_rounds(exact.per_player, rows, K, supports, scale, cfg.opts,
                      std::min(cfg.max_rounds, 50), round + polish_rounds_used, structure,
                      extra_log, &extra_rounds);
        const double pg_after = worst_exact_pg(K);
        if (pg_after < pg_final) {
            pg_final = pg_after;
            polish_rounds_used += extra_rounds;
            for (auto& rec : extra_log) res.broadcast_log.push_back(std::move(rec));
        } else {
            K = K_before;
        }
    }
    // The criterion that counts is the exact one.
    polished = pg_final < cfg.opts.eps_polish;
    res.projected_gradient = pg_final;

    res.K = FeedbackGain(K, structure);
    res.rounds = round + polish_rounds_used;
    res.converged = step2_converged && polished;
    res.final_budgets = budgets;
    // Report exact (unshifted) costs.
    for (int i = 0; i < r; ++i) {
        exact[i]->set_fixed(K);
        res.J_players.push_back(exact[i]->value(exact[i]->extract(K)));
    }
    if (cfg.mode == GameMode::Social) res.J_social = res.J_players.front();
    return res;
}

}  // namespace

GameResult run_game(const LtiSystem& sys, const std::vector<PlayerSpec>& players,
                    const DesignWeights* social_weights, const GameConfig& cfg,
                    const FeedbackGain& K0) {
    // No single barrier strength suits every instance: too weak and the
    // round-robin cycles along flat directions, too strong and the shifted
    // equilibrium drifts from the true one.  Escalate deterministically and
    // keep the best attempt by the feasibility measure.
    GameResult best;
    bool have_best = false;
    GameConfig attempt_cfg = cfg;
    for (double shift = cfg.opts.gramian_shift;;) {
        attempt_cfg.opts.gramian_shift = shift;
        GameResult res = run_game_attempt(sys, players, social_weights, attempt_cfg, K0);
        if (!have_best || (res.converged && !best.converged) ||
            (res.converged == best.converged &&
             res.projected_gradient < best.projected_gradient)) {
            best = std::move(res);
            have_best = true;
        }
        if (best.converged || shift <= 0.0 || shift >= 1e-2) break;
        shift *= 10.0;
    }
    return best;
}

GameResult coupled_nash(const LtiSystem& sys, const AgentPartition& part, const AgentWeights& aw,
                        const GameConfig& cfg, const FeedbackGain& K0) {
    GameConfig config = cfg;
    config.mode = GameMode::Selfish;
    return run_game(sys, players_from_agents(part, aw), nullptr, config, K0);
}

GameResult social_game(const LtiSystem& sys, const AgentPartition& part, const DesignWeights& w,
                       const GameConfig& cfg, const FeedbackGain& K0) {
    GameConfig config = cfg;
    config.mode = GameMode::Social;
    std::vector<PlayerSpec> players;
    for (int i = 0; i < part.num_agents(); ++i) {
        PlayerSpec p;
        for (int k = 0; k < part.nodes_of(i); ++k) p.nodes.push_back(part.first_node(i) + k);
        players.push_back(std::move(p));
    }
    return run_game(sys, players, &w, config, K0);
}

GameResult decoupled_nash(const LtiSystem& sys, const AgentPartition& part, const AgentWeights& aw,
                          const SolverOptions& opts, const FeedbackGain* K0) {
    const BlockStructure& structure = sys.structure;
    const double scale = std::sqrt(static_cast<double>(sys.num_inputs()) * sys.num_states());

    FeedbackGain K_init;
    if (K0 != nullptr) {
        K_init = block_project(*K0, BlockPart::Diag);
    } else {
        MatrixXd qsum = MatrixXd::Zero(sys.num_states(), sys.num_states());
        for (const auto& Qi : aw.Q) qsum += Qi;
        MatrixXd rblk = MatrixXd::Zero(sys.num_inputs(), sys.num_inputs());
        for (int i = 0; i < part.num_agents(); ++i) {
            rblk.block(part.input_offset(i), part.input_offset(i), part.inputs_of(i),
                       part.inputs_of(i)) = aw.R[i];
        }
        K_init = initial_gain(sys, DesignWeights(qsum, rblk));
    }
    if (spectral_abscissa(sys.A - sys.B * K_init.K) >= -opts.stability_margin) {
        throw NoStabilizingInitError("decoupled_nash: block-diagonal K0 does not stabilize");
    }

    auto players = players_from_agents(part, aw);
    std::vector<std::vector<int>> rows;
    for (const auto& p : players) rows.push_back(input_rows_of_nodes(structure, p.nodes));
    auto objs = build_objectives(sys, players, nullptr, GameMode::Selfish, K_init.K, opts.gramian_shift);

    // supports frozen to the full diagonal blocks of each player (local rows)
    const SupportSet diag = diagonal_block_support(structure);
    std::vector<SupportSet> supports(players.size());
    for (std::size_t i = 0; i < players.size(); ++i) {
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            for (int c = 0; c < sys.num_states(); ++c) {
                if (diag.contains(rows[i][k], c)) supports[i].insert(static_cast<int>(k), c);
            }
        }
    }

    GameResult res;
    MatrixXd K = K_init.K;
    for (std::size_t i = 0; i < players.size(); ++i) {
        res.broadcast_log.push_back(
            make_record(0, static_cast<int>(i), rows[i], K, SupportSet(), structure));
    }
    int rounds_used = 0;
    const bool met = polish_rounds(objs.per_player, rows, K, supports, scale, opts, 300, 0, structure,
                                   res.broadcast_log, &rounds_used);

    res.K = FeedbackGain(K, structure);
    res.rounds = rounds_used;
    res.converged = met;
    res.final_budgets.assign(players.size(), 0);
    // Report exact (unshifted) costs.
    auto exact = build_objectives(sys, players, nullptr, GameMode::Selfish, K, 0.0);
    for (std::size_t i = 0; i < players.size(); ++i) {
        res.J_players.push_back(exact[i]->value(exact[i]->extract(K)));
    }
    return res;
}

FeedbackGain replay_broadcast_log(const std::vector<BroadcastRecord>& log,
                                  const BlockStructure& structure) {
    MatrixXd K = MatrixXd::Zero(structure.total_inputs(), structure.total_states());
    for (const auto& rec : log) {
        for (int r : rec.rows) K.row(r).setZero();
        for (const auto& [r, c, v] : rec.triplets) K(r, c) = v;
    }
    return FeedbackGain(K, structure);
}

}  // namespace sparselqr
