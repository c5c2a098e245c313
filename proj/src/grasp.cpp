#include "sparselqr/grasp.hpp"

#include <cmath>

namespace sparselqr {

FeedbackGain initial_gain(const LtiSystem& sys, const DesignWeights& w) {
    return initial_gain(sys, w, 0);
}

FeedbackGain initial_gain(const LtiSystem& sys, const DesignWeights& w, int s) {
    CareSolution care;
    try {
        care = solve_care(sys.A, sys.B, w.Q, w.R);
    } catch (const NotStabilizableError&) {
        throw NoStabilizingInitError("initial_gain: system is not stabilizable");
    }
    FeedbackGain K(care.K_dense, sys.structure);
    if (s > 0) {
        // The truncated dense optimum is the best-informed start when it fits
        // the budget and keeps the loop stable.
        FeedbackGain Ks = card_off(K) <= s ? K : prune_top_s(K, s);
        if (closed_loop(sys, Ks).is_stable) return Ks;
    }
    FeedbackGain Kbd = block_project(K, BlockPart::Diag);
    if (closed_loop(sys, Kbd).is_stable) return Kbd;

    // The projection of the dense gain can destabilize (consensus-type
    // weights rely on cross-coupling).  Fall back to other block-diagonal
    // candidates before giving up.
    FeedbackGain zero(MatrixXd::Zero(sys.num_inputs(), sys.num_states()), sys.structure);
    if (closed_loop(sys, zero).is_stable) return zero;

    // Per-node Riccati gains against the diagonal sub-plants.
    try {
        MatrixXd Kpb = MatrixXd::Zero(sys.num_inputs(), sys.num_states());
        for (int node = 0; node < sys.structure.num_nodes(); ++node) {
            const int s0 = sys.structure.state_offset(node);
            const int u0 = sys.structure.input_offset(node);
            const int m_j = sys.structure.nodes()[node].states;
            const int p_j = sys.structure.nodes()[node].inputs;
            if (p_j == 0) continue;
            const MatrixXd Qj =
                w.Q.block(s0, s0, m_j, m_j) + 1e-8 * MatrixXd::Identity(m_j, m_j);
            const CareSolution local = solve_care(sys.A.block(s0, s0, m_j, m_j),
                                                  sys.B.block(s0, u0, m_j, p_j), Qj,
                                                  w.R.block(u0, u0, p_j, p_j));
            Kpb.block(u0, s0, p_j, m_j) = local.K_dense;
        }
        FeedbackGain Kblocks(Kpb, sys.structure);
        if (closed_loop(sys, Kblocks).is_stable) return Kblocks;
    } catch (const SolverError&) {
        // fall through to the failure below
    }
    throw NoStabilizingInitError(
        "initial_gain: no stabilizing block-diagonal initialization found");
}

double armijo_search(const SmoothObjective& obj, const MatrixXd& V, double J0,
                     const MatrixXd& grad, const MatrixXd& dV, const ArmijoOptions& opts) {
    const double slope = (grad.array() * dV.array()).sum();
    if (!(slope < 0.0)) throw NotDescentError("armijo_search: not a descent direction");

    double lambda = 1.0;
    for (int k = 0; k < opts.max_backtracks; ++k, lambda *= opts.shrink) {
        const MatrixXd Vn = V + lambda * dV;
        if (!obj.stabilizing(Vn)) continue;
        if (obj.value(Vn) <= J0 + opts.c * lambda * slope) return lambda;
    }
    throw LineSearchFailedError("armijo_search: no acceptable step after max backtracks");
}

PolishOutcome polish_on_support(const SmoothObjective& obj, const MatrixXd& V0,
                                const SupportSet& support, double criterion_scale,
                                const SolverOptions& opts) {
    PolishOutcome out;
    out.V = V0;
    if (support.empty()) {
        out.met = true;
        return out;
    }
    int stalled = 0;
    for (int iter = 0; iter < opts.max_outer_iters; ++iter) {
        const MatrixXd pg = support.mask(obj.gradient(out.V));
        out.projected_gradient_norm = pg.norm() / criterion_scale;
        if (out.projected_gradient_norm < opts.eps_polish) {
            out.met = true;
            return out;
        }
        const MatrixXd dV = restricted_newton_step(obj, out.V, support, opts.newton);
        const double J0 = obj.value(out.V);
        double lambda = 0.0;
        try {
            lambda = armijo_search(obj, out.V, J0, pg, dV, opts.armijo);
        } catch (const SolverError&) {
            return out;  // stalled below the criterion; report honestly
        }
        out.V += lambda * dV;
        out.iterations = iter + 1;
        // Cut the loop when the decrease sits at the noise floor: on a flat
        // valley the criterion may be unreachable and every extra iteration
        // costs a full Newton solve for nothing.
        if (J0 - obj.value(out.V) < 1e-12 * std::max(1.0, std::abs(J0))) {
            if (++stalled >= 3) return out;
        } else {
            stalled = 0;
        }
    }
    const MatrixXd pg = support.mask(obj.gradient(out.V));
    out.projected_gradient_norm = pg.norm() / criterion_scale;
    out.met = out.projected_gradient_norm < opts.eps_polish;
    return out;
}

FeedbackGain polish(const SmoothObjective& obj, const FeedbackGain& K, const SolverOptions& opts) {
    const SupportSet support = SupportSet::nonzeros(K.K);
    const double scale = std::sqrt(static_cast<double>(K.rows()) * K.cols());
    const auto outcome = polish_on_support(obj, K.K, support, scale, opts);
    return FeedbackGain(outcome.V, K.structure);
}

SolveResult grasp_minimize(const LtiSystem& sys, const DesignWeights& w, int s,
                           const FeedbackGain& K0, const SolverOptions& opts) {
    if (s < 0) throw InvalidParamsError("grasp_minimize: s must be >= 0");
    SocialObjective obj(sys, w, opts.gramian_shift);
    const double scale = std::sqrt(static_cast<double>(sys.num_inputs()) * sys.num_states());

    FeedbackGain K = K0;
    if (!obj.stabilizing(K.K)) {
        throw NoStabilizingInitError("grasp_minimize: K0 does not stabilize");
    }
    if (card_off(K) > s) {
        K = prune_top_s(K, s);
        if (!obj.stabilizing(K.K)) {
            throw NoStabilizingIterateError("grasp_minimize: pruned K0 does not stabilize");
        }
    }

    SolveResult res;
    res.K = K;
    FeedbackGain stable_store = K;  // last stable post-prune iterate
    bool step2_converged = false;
    bool prune_backtracked = false;

    for (int iter = 0; iter < opts.max_outer_iters; ++iter) {
        const MatrixXd Kprev = K.K;

        const MatrixXd g = obj.gradient(K.K);
        const SupportSet Z = SupportSet::nonzeros(prune_off_entries(g, K.structure, 2 * s));
        const SupportSet T = Z.united(SupportSet::nonzeros(K.K));
        if (T.empty()) {
            step2_converged = true;
            break;
        }

        IterationRecord rec;
        rec.iteration = iter + 1;
        try {
            const MatrixXd dK = restricted_newton_step(obj, K.K, T, opts.newton);
            const double lambda =
                armijo_search(obj, K.K, obj.value(K.K), T.mask(g), dK, opts.armijo);
            K.K += lambda * dK;
            rec.step_size = lambda;
        } catch (const NotDescentError&) {
            rec.step_size = 0.0;  // restricted gradient vanished; prune and test stop
        } catch (const LineSearchFailedError&) {
            rec.step_size = 0.0;
        }

        FeedbackGain pruned = prune_top_s(K, s);
        if (obj.stabilizing(pruned.K)) {
            K = pruned;
            stable_store = K;
        } else if (rec.step_size > 0.0) {
            // Pruning the full step destabilized: shrink the step and re-prune.
            // The limit of a zero step is the previous (stable, feasible) iterate,
            // so this search terminates with a stabilizing candidate if any
            // shrunk step admits one.
            double lam = rec.step_size;
            bool accepted = false;
            const MatrixXd dK = (K.K - Kprev) / rec.step_size;
            for (int b = 0; b < opts.armijo.max_backtracks; ++b) {
                lam *= opts.armijo.shrink;
                FeedbackGain cand = prune_top_s(FeedbackGain(Kprev + lam * dK, K.structure), s);
                if (obj.stabilizing(cand.K) && obj.value(cand.K) <= obj.value(stable_store.K)) {
                    K = cand;
                    stable_store = K;
                    rec.step_size = lam;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                K = stable_store;  // backtrack to the stored stable solution
                rec.backtracked = true;
                prune_backtracked = true;
            }
        } else {
            K = stable_store;  // backtrack to the stored stable solution
            rec.backtracked = true;
            prune_backtracked = true;
        }

        rec.J = obj.value(K.K);
        rec.card_off = card_off(K);
        res.trace.push_back(rec);
        res.iterations = iter + 1;

        if ((K.K - Kprev).norm() <
            opts.eps_abs * scale + opts.eps_rel * Kprev.norm()) {
            step2_converged = true;
            break;
        }
        if (prune_backtracked) break;  // stored iterate is final for Step 2
    }

    const SupportSet support = SupportSet::nonzeros(K.K);
    auto polished = polish_on_support(obj, K.K, support, scale, opts);
    K.K = polished.V;

    if (opts.gramian_shift > 0.0) {
        // Where the barrier actively props the iterate, the shifted optimum
        // is not an exact stationary point.  A final polish on the unshifted
        // objective restores the feasibility criterion on the frozen support;
        // the Armijo stability guard keeps it from walking into the boundary.
        SocialObjective exact(sys, w, 0.0);
        // Aim one decade below the reported tolerance so the final iterate
        // clears the criterion with headroom instead of landing right on it.
        SolverOptions tight = opts;
        tight.eps_polish = 0.1 * opts.eps_polish;
        tight.max_outer_iters = std::min(opts.max_outer_iters, 50);
        auto exact_polish = polish_on_support(exact, K.K, support, scale, tight);
        exact_polish.met = exact_polish.projected_gradient_norm < opts.eps_polish;
        if (exact_polish.met ||
            exact_polish.projected_gradient_norm < polished.projected_gradient_norm) {
            K.K = exact_polish.V;
            polished = exact_polish;
        }
    }

    res.J = social_value(sys, w, K).value;  // report the exact (unshifted) cost

    // Never return an answer dominated by a feasible starting point: a warm
    // start can sit at a better stationary point than the one the descent
    // found after the support was re-selected.
    if (card_off(K0) <= s) {
        const double J_start = social_value(sys, w, K0).value;
        if (J_start < res.J) {
            SocialObjective exact(sys, w, 0.0);
            const SupportSet s0 = SupportSet::nonzeros(K0.K);
            SolverOptions warm_opts = opts;
            warm_opts.max_outer_iters = std::min(opts.max_outer_iters, 50);
            const auto warm = polish_on_support(exact, K0.K, s0, scale, warm_opts);
            const double J_warm = social_value(sys, w, FeedbackGain(warm.V, K0.structure)).value;
            if (warm.met && J_warm < res.J) {
                K.K = warm.V;
                polished = warm;
                res.J = J_warm;
            }
        }
    }

    res.K = K;
    res.converged = step2_converged && polished.met;
    res.abscissa = spectral_abscissa(sys.A - sys.B * K.K);
    return res;
}

}  // namespace sparselqr
