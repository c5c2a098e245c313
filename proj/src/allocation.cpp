#include "sparselqr/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sparselqr {

std::vector<std::pair<int, double>> monotone_envelope(
    const std::vector<std::pair<int, double>>& series) {
    std::vector<std::pair<int, double>> out;
    double best = std::numeric_limits<double>::infinity();
    int prev_s = std::numeric_limits<int>::min();
    for (const auto& [s, J] : series) {
        if (s < prev_s) throw InvalidParamsError("monotone_envelope: series not sorted in s");
        prev_s = s;
        best = std::min(best, J);
        out.emplace_back(s, best);
    }
    return out;
}

AllocationReport allocate(const std::vector<double>& J_decoupled, const SweepPoint& point) {
    const int r = static_cast<int>(J_decoupled.size());
    if (r == 0 || static_cast<int>(point.J_coupled.size()) != r) {
        throw InvalidParamsError("allocate: agent counts do not match");
    }
    if (!point.feasible) throw InvalidParamsError("allocate: point is infeasible");
    for (double v : J_decoupled)
        if (!std::isfinite(v)) throw InvalidParamsError("allocate: non-finite input");

    AllocationReport rep;
    rep.s = point.s;
    double J_dec_total = 0.0;
    for (double v : J_decoupled) J_dec_total += v;
    rep.v_soc = J_dec_total - point.J_soc;

    double v_sum = 0.0;
    for (int i = 0; i < r; ++i) {
        const double vi = J_decoupled[i] - point.J_coupled[i];
        rep.v.push_back(vi);
        v_sum += vi;
        if (vi < 0.0) rep.negative_payoff_agents.push_back(i);
    }
    rep.xi = (rep.v_soc - v_sum) / r;
    double alpha_sum = 0.0;
    for (int i = 0; i < r; ++i) {
        rep.alpha.push_back(rep.v[i] + rep.xi);
        alpha_sum += rep.alpha.back();
    }
    // Float slack: the defining inequality is exact in the algebra but the two
    // sides come from separately converged solves.
    const double slack = 1e-8 * std::max(1.0, std::abs(J_dec_total));
    rep.bargaining_success = rep.v_soc >= v_sum - slack;

    if (alpha_sum <= 1e-12 * std::max(1.0, std::abs(J_dec_total))) {
        rep.degenerate = true;  // DegenerateAllocation: C_i undefined
        return rep;
    }
    for (int i = 0; i < r; ++i) rep.cost_fraction.push_back(rep.alpha[i] / alpha_sum);
    return rep;
}

std::vector<std::vector<double>> star_payoffs(const std::vector<double>& J_decoupled,
                                              const std::vector<SweepPoint>& series) {
    const int r = static_cast<int>(J_decoupled.size());
    std::vector<std::vector<double>> out(r);
    std::vector<double> best(r, std::numeric_limits<double>::infinity());
    int prev_s = std::numeric_limits<int>::min();
    for (const auto& point : series) {
        if (point.s < prev_s) throw InvalidParamsError("star_payoffs: series not sorted in s");
        prev_s = point.s;
        for (int i = 0; i < r; ++i) {
            best[i] = std::min(best[i], point.J_coupled[i]);
            out[i].push_back(J_decoupled[i] - best[i]);
        }
    }
    return out;
}

namespace {

double coalition_value_at(const LtiSystem& sys, const PlayerSpec& player, const MatrixXd& K) {
    std::vector<int> rows;
    for (int node : player.nodes) {
        for (int k = 0; k < sys.structure.nodes()[node].inputs; ++k) {
            rows.push_back(sys.structure.input_offset(node) + k);
        }
    }
    PlayerObjective obj(sys, rows, player.Q, player.R, K);
    return obj.value(obj.extract(K));
}

}  // namespace

CoalitionEfficiencyReport coalition_efficiency_check(
    const LtiSystem& sys, const AgentPartition& part, const AgentWeights& aw,
    const std::vector<std::vector<std::vector<int>>>& partitions, int s,
    const GameConfig& cfg, const FeedbackGain& K0) {
    const auto dne = decoupled_nash(sys, part, aw, cfg.opts);
    double J_dec_total = 0.0;
    for (double J : dne.J_players) J_dec_total += J;

    CoalitionEfficiencyReport rep;

    // grand coalition: one super-player carrying the summed weights
    std::vector<int> everyone(part.num_agents());
    for (int i = 0; i < part.num_agents(); ++i) everyone[i] = i;
    const auto grand_players = coalition_players(part, aw, {everyone});
    GameConfig grand_cfg = cfg;
    grand_cfg.mode = GameMode::Selfish;
    grand_cfg.initial_budgets.clear();
    const auto grand = run_game(sys, grand_players, nullptr, grand_cfg, K0);
    rep.grand_converged = grand.converged;
    rep.grand_value = J_dec_total - coalition_value_at(sys, grand_players[0], grand.K.K);

    const double slack = 1e-9 * std::max(1.0, std::abs(J_dec_total));
    for (const auto& rho : partitions) {
        CoalitionValue cv;
        cv.partition = rho;
        const auto players = coalition_players(part, aw, rho);
        GameConfig rho_cfg = cfg;
        rho_cfg.mode = GameMode::Selfish;
        rho_cfg.initial_budgets.clear();
        const auto ne = run_game(sys, players, nullptr, rho_cfg, K0);
        cv.converged = ne.converged;
        for (std::size_t c = 0; c < players.size(); ++c) {
            double dec = 0.0;
            for (int a : rho[c]) dec += dne.J_players[a];
            const double value = dec - coalition_value_at(sys, players[c], ne.K.K);
            cv.values.push_back(value);
            cv.total += value;
        }
        if (cv.converged && rep.grand_converged && rep.grand_value + slack < cv.total) {
            rep.efficient = false;
        }
        rep.partitions.push_back(std::move(cv));
    }
    return rep;
}

}  // namespace sparselqr
