#pragma once

#include <vector>

#include "sparselqr/lqr_objective.hpp"

namespace sparselqr {

struct ArmijoOptions {
    double c = 1e-4;
    double shrink = 0.5;
    int max_backtracks = 50;
};

struct SolverOptions {
    double eps_abs = 1e-4;
    double eps_rel = 1e-4;
    double eps_polish = 1e-4;  // epsilon_2; default 1e-3 for games
    ArmijoOptions armijo;
    int max_outer_iters = 500;
    double stability_margin = kStabilityMargin;
    // Relative Gramian shift for the solvers' internal objectives (barrier
    // against boundary-riding iterates); reported values stay exact.
    double gramian_shift = 1e-8;
    NewtonStepOptions newton;
};

struct IterationRecord {
    int iteration = 0;
    double J = 0.0;
    int card_off = 0;
    double step_size = 0.0;
    bool backtracked = false;  // pruning reverted to the stored stable iterate
};

struct SolveResult {
    FeedbackGain K;
    double J = 0.0;
    bool converged = false;
    int iterations = 0;
    double abscissa = 0.0;
    std::vector<IterationRecord> trace;
};

// Block-diagonal projection of the dense CARE gain; throws NoStabilizingInit
// when the projection fails to stabilize.
FeedbackGain initial_gain(const LtiSystem& sys, const DesignWeights& w);
// Budget-aware variant: additionally considers the dense Riccati gain
// truncated to the budget before the block-diagonal candidates.
FeedbackGain initial_gain(const LtiSystem& sys, const DesignWeights& w, int s);

// Backtracking line search: largest lambda in {1, shrink, shrink^2, ...}
// satisfying sufficient decrease and closed-loop stability.
double armijo_search(const SmoothObjective& obj, const MatrixXd& V, double J0,
                     const MatrixXd& grad, const MatrixXd& dV, const ArmijoOptions& opts);

// Greedy sparsity-constrained minimization: support expansion along the top
// 2s off-block gradient directions, restricted Newton descent, pruning to s,
// then polishing on the final support.
SolveResult grasp_minimize(const LtiSystem& sys, const DesignWeights& w, int s,
                           const FeedbackGain& K0, const SolverOptions& opts = {});

// Newton iterations on the frozen support supp(K) until the projected
// gradient norm criterion is met.
FeedbackGain polish(const SmoothObjective& obj, const FeedbackGain& K, const SolverOptions& opts);

// Shared inner loop for polishing an arbitrary matrix variable on a frozen
// support.  Returns the criterion value at exit.
struct PolishOutcome {
    MatrixXd V;
    double projected_gradient_norm = 0.0;  // ||grad|_I||_F / sqrt(qm)
    bool met = false;
    int iterations = 0;
};
PolishOutcome polish_on_support(const SmoothObjective& obj, const MatrixXd& V0,
                                const SupportSet& support, double criterion_scale,
                                const SolverOptions& opts);

}  // namespace sparselqr
