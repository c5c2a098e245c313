#include "sparselqr/lqr_objective.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace sparselqr {

namespace {

void require_symmetric(const MatrixXd& M, const char* name) {
    if (M.rows() != M.cols()) throw ValidationError(std::string(name) + ": not square");
    const double scale = std::max(M.norm(), 1.0);
    if ((M - M.transpose()).norm() > 1e-12 * scale) {
        throw ValidationError(std::string(name) + ": not symmetric");
    }
}

double min_eigenvalue(const MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw EigenFailureError("eigenvalue check failed");
    return es.eigenvalues().minCoeff();
}

MatrixXd stable_closed_loop(const MatrixXd& A_cl) {
    if (spectral_abscissa(A_cl) >= -kStabilityMargin) {
        throw UnstableClosedLoopError("closed loop is not stabilizing");
    }
    return A_cl;
}

// With shift_abs > 0 the pair describes the barrier-regularized objective
// J_delta = tr(P (DD^T + shift_abs I)): every closed-loop mode is treated as
// (faintly) disturbed, so modes that feedback pushes toward the stability
// boundary inflate the cost instead of riding it for free.
ObjectiveEvaluation evaluate_pair(const MatrixXd& A_cl, const MatrixXd& W,
                                  const VectorXd& D, double shift_abs) {
    ObjectiveEvaluation out;
    out.P = solve_lyapunov(A_cl, W, LyapunovSide::LeftTranspose);
    MatrixXd G = D * D.transpose();
    G.diagonal().array() += shift_abs;
    out.L = solve_lyapunov(A_cl, G, LyapunovSide::RightTranspose);
    out.value = D.dot(out.P * D) + shift_abs * out.P.trace();
    return out;
}

}  // namespace

DesignWeights::DesignWeights(MatrixXd q, MatrixXd r) : Q(std::move(q)), R(std::move(r)) {
    require_symmetric(Q, "Q");
    require_symmetric(R, "R");
    if (min_eigenvalue(Q) < -1e-10 * std::max(Q.norm(), 1.0)) {
        throw ValidationError("Q: not positive semidefinite");
    }
    if (min_eigenvalue(R) <= 0.0) throw ValidationError("R: not positive definite");
}

void AgentWeights::certify(const DesignWeights& social, const AgentPartition& part) {
    sum_matches_social = false;
    if (static_cast<int>(Q.size()) != part.num_agents() ||
        static_cast<int>(R.size()) != part.num_agents()) {
        throw ValidationError("agent weights: one (Q_i, R_i) pair per agent required");
    }
    MatrixXd qsum = MatrixXd::Zero(social.Q.rows(), social.Q.cols());
    for (const auto& Qi : Q) {
        if (Qi.rows() != social.Q.rows() || Qi.cols() != social.Q.cols()) {
            throw ValidationError("agent weights: Q_i has wrong dimensions");
        }
        qsum += Qi;
    }
    MatrixXd rblk = MatrixXd::Zero(social.R.rows(), social.R.cols());
    for (int i = 0; i < part.num_agents(); ++i) {
        const int off = part.input_offset(i);
        const int n = part.inputs_of(i);
        if (R[i].rows() != n || R[i].cols() != n) {
            throw ValidationError("agent weights: R_i has wrong dimensions");
        }
        rblk.block(off, off, n, n) = R[i];
    }
    const double tol = 1e-10;
    sum_matches_social = (qsum - social.Q).norm() <= tol * std::max(1.0, social.Q.norm()) &&
                         (rblk - social.R).norm() <= tol * std::max(1.0, social.R.norm());
}

ObjectiveEvaluation social_value(const LtiSystem& sys, const DesignWeights& w,
                                 const FeedbackGain& K) {
    const MatrixXd A_cl = stable_closed_loop(sys.A - sys.B * K.K);
    const MatrixXd W = w.Q + K.K.transpose() * w.R * K.K;
    return evaluate_pair(A_cl, W, sys.D, 0.0);
}

MatrixXd social_gradient(const LtiSystem& sys, const DesignWeights& w, const FeedbackGain& K) {
    const auto eval = social_value(sys, w, K);
    return 2.0 * (w.R * K.K - sys.B.transpose() * eval.P) * eval.L;
}

namespace {

std::vector<int> agent_rows(const AgentPartition& part, int agent) {
    std::vector<int> rows;
    for (int k = 0; k < part.inputs_of(agent); ++k) rows.push_back(part.input_offset(agent) + k);
    return rows;
}

}  // namespace

ObjectiveEvaluation selfish_value(const LtiSystem& sys, const AgentPartition& part,
                                  const AgentWeights& aw, int agent, const FeedbackGain& K) {
    const MatrixXd V = K.K.middleRows(part.input_offset(agent), part.inputs_of(agent));
    const MatrixXd A_cl = stable_closed_loop(sys.A - sys.B * K.K);
    const MatrixXd W = aw.Q[agent] + V.transpose() * aw.R[agent] * V;
    return evaluate_pair(A_cl, W, sys.D, 0.0);
}

MatrixXd selfish_gradient(const LtiSystem& sys, const AgentPartition& part,
                          const AgentWeights& aw, int agent, const FeedbackGain& K) {
    PlayerObjective obj(sys, agent_rows(part, agent), aw.Q[agent], aw.R[agent], K.K);
    return obj.gradient(K.K.middleRows(part.input_offset(agent), part.inputs_of(agent)));
}

// ---------------------------------------------------------------------------
// SocialObjective

SocialObjective::SocialObjective(const LtiSystem& sys, const DesignWeights& w,
                                 double gramian_shift)
    : sys_(sys), w_(w), shift_abs_(gramian_shift * sys.D.squaredNorm()) {}

int SocialObjective::rows() const { return sys_.num_inputs(); }
int SocialObjective::cols() const { return sys_.num_states(); }

bool SocialObjective::stabilizing(const MatrixXd& V) const {
    return spectral_abscissa(sys_.A - sys_.B * V) < -kStabilityMargin;
}

double SocialObjective::value(const MatrixXd& V) const {
    const MatrixXd A_cl = stable_closed_loop(sys_.A - sys_.B * V);
    const MatrixXd P =
        solve_lyapunov(A_cl, MatrixXd(w_.Q + V.transpose() * w_.R * V), LyapunovSide::LeftTranspose);
    return sys_.D.dot(P * sys_.D) + shift_abs_ * P.trace();
}

MatrixXd SocialObjective::gradient(const MatrixXd& V) const {
    const MatrixXd A_cl = stable_closed_loop(sys_.A - sys_.B * V);
    const auto eval = evaluate_pair(A_cl, MatrixXd(w_.Q + V.transpose() * w_.R * V), sys_.D, shift_abs_);
    return 2.0 * (w_.R * V - sys_.B.transpose() * eval.P) * eval.L;
}

MatrixXd SocialObjective::hessian_product(const MatrixXd& V, const MatrixXd& dir) const {
    const MatrixXd A_cl = stable_closed_loop(sys_.A - sys_.B * V);
    const auto eval = evaluate_pair(A_cl, MatrixXd(w_.Q + V.transpose() * w_.R * V), sys_.D, shift_abs_);
    const MatrixXd BD = sys_.B * dir;
    const MatrixXd Wp = dir.transpose() * w_.R * V + V.transpose() * w_.R * dir -
                        BD.transpose() * eval.P - eval.P * BD;
    const MatrixXd Pp = solve_lyapunov(A_cl, Wp, LyapunovSide::LeftTranspose);
    const MatrixXd Wl = -(BD * eval.L + eval.L * BD.transpose());
    const MatrixXd Lp = solve_lyapunov(A_cl, Wl, LyapunovSide::RightTranspose);
    return 2.0 * (w_.R * dir - sys_.B.transpose() * Pp) * eval.L +
           2.0 * (w_.R * V - sys_.B.transpose() * eval.P) * Lp;
}

// ---------------------------------------------------------------------------
// PlayerObjective

PlayerObjective::PlayerObjective(const LtiSystem& sys, std::vector<int> row_indices, MatrixXd Qi,
                                 MatrixXd Ri, MatrixXd K_fixed, double gramian_shift)
    : sys_(sys), rows_(std::move(row_indices)), Qi_(std::move(Qi)), Ri_(std::move(Ri)),
      K_fixed_(std::move(K_fixed)), shift_abs_(gramian_shift * sys.D.squaredNorm()) {
    Bi_.resize(sys.num_states(), rows_.size());
    for (std::size_t k = 0; k < rows_.size(); ++k) Bi_.col(k) = sys.B.col(rows_[k]);
}

void PlayerObjective::set_fixed(const MatrixXd& K_full) { K_fixed_ = K_full; }

MatrixXd PlayerObjective::embed(const MatrixXd& V) const {
    MatrixXd K = K_fixed_;
    for (std::size_t k = 0; k < rows_.size(); ++k) K.row(rows_[k]) = V.row(k);
    return K;
}

MatrixXd PlayerObjective::extract(const MatrixXd& K_full) const {
    MatrixXd V(rows_.size(), K_full.cols());
    for (std::size_t k = 0; k < rows_.size(); ++k) V.row(k) = K_full.row(rows_[k]);
    return V;
}

MatrixXd PlayerObjective::closed_loop_fixed(const MatrixXd& V) const {
    return sys_.A - sys_.B * embed(V);
}

int PlayerObjective::rows() const { return static_cast<int>(rows_.size()); }
int PlayerObjective::cols() const { return sys_.num_states(); }

bool PlayerObjective::stabilizing(const MatrixXd& V) const {
    return spectral_abscissa(closed_loop_fixed(V)) < -kStabilityMargin;
}

double PlayerObjective::value(const MatrixXd& V) const {
    const MatrixXd A_cl = stable_closed_loop(closed_loop_fixed(V));
    const MatrixXd P = solve_lyapunov(A_cl, MatrixXd(Qi_ + V.transpose() * Ri_ * V),
                                      LyapunovSide::LeftTranspose);
    return sys_.D.dot(P * sys_.D) + shift_abs_ * P.trace();
}

MatrixXd PlayerObjective::gradient(const MatrixXd& V) const {
    const MatrixXd A_cl = stable_closed_loop(closed_loop_fixed(V));
    const auto eval = evaluate_pair(A_cl, MatrixXd(Qi_ + V.transpose() * Ri_ * V), sys_.D, shift_abs_);
    return 2.0 * (Ri_ * V - Bi_.transpose() * eval.P) * eval.L;
}

MatrixXd PlayerObjective::hessian_product(const MatrixXd& V, const MatrixXd& dir) const {
    const MatrixXd A_cl = stable_closed_loop(closed_loop_fixed(V));
    const auto eval = evaluate_pair(A_cl, MatrixXd(Qi_ + V.transpose() * Ri_ * V), sys_.D, shift_abs_);
    const MatrixXd BD = Bi_ * dir;
    const MatrixXd Wp = dir.transpose() * Ri_ * V + V.transpose() * Ri_ * dir -
                        BD.transpose() * eval.P - eval.P * BD;
    const MatrixXd Pp = solve_lyapunov(A_cl, Wp, LyapunovSide::LeftTranspose);
    const MatrixXd Wl = -(BD * eval.L + eval.L * BD.transpose());
    const MatrixXd Lp = solve_lyapunov(A_cl, Wl, LyapunovSide::RightTranspose);
    return 2.0 * (Ri_ * dir - Bi_.transpose() * Pp) * eval.L +
           2.0 * (Ri_ * V - Bi_.transpose() * eval.P) * Lp;
}

// ---------------------------------------------------------------------------
// RowRestrictedObjective

RowRestrictedObjective::RowRestrictedObjective(const SmoothObjective& full,
                                               std::vector<int> row_indices, MatrixXd K_fixed)
    : full_(full), rows_(std::move(row_indices)), K_fixed_(std::move(K_fixed)) {}

void RowRestrictedObjective::set_fixed(const MatrixXd& K_full) { K_fixed_ = K_full; }

MatrixXd RowRestrictedObjective::embed(const MatrixXd& V) const {
    MatrixXd K = K_fixed_;
    for (std::size_t k = 0; k < rows_.size(); ++k) K.row(rows_[k]) = V.row(k);
    return K;
}

MatrixXd RowRestrictedObjective::embed_zero(const MatrixXd& V) const {
    MatrixXd K = MatrixXd::Zero(K_fixed_.rows(), K_fixed_.cols());
    for (std::size_t k = 0; k < rows_.size(); ++k) K.row(rows_[k]) = V.row(k);
    return K;
}

MatrixXd RowRestrictedObjective::extract(const MatrixXd& K_full) const {
    MatrixXd V(rows_.size(), K_full.cols());
    for (std::size_t k = 0; k < rows_.size(); ++k) V.row(k) = K_full.row(rows_[k]);
    return V;
}

int RowRestrictedObjective::rows() const { return static_cast<int>(rows_.size()); }
int RowRestrictedObjective::cols() const { return full_.cols(); }

bool RowRestrictedObjective::stabilizing(const MatrixXd& V) const {
    return full_.stabilizing(embed(V));
}

double RowRestrictedObjective::value(const MatrixXd& V) const { return full_.value(embed(V)); }

MatrixXd RowRestrictedObjective::gradient(const MatrixXd& V) const {
    return extract(full_.gradient(embed(V)));
}

MatrixXd RowRestrictedObjective::hessian_product(const MatrixXd& V, const MatrixXd& dir) const {
    return extract(full_.hessian_product(embed(V), embed_zero(dir)));
}

// ---------------------------------------------------------------------------
// Restricted Newton step

MatrixXd restricted_newton_step(const SmoothObjective& obj, const MatrixXd& V,
                                const SupportSet& support, const NewtonStepOptions& opts) {
    if (support.empty()) throw InvalidParamsError("restricted_newton_step: empty support");

    const std::vector<std::pair<int, int>> idx(support.entries().begin(), support.entries().end());
    const int dim = static_cast<int>(idx.size());

    auto pack = [&](const MatrixXd& M) {
        VectorXd v(dim);
        for (int k = 0; k < dim; ++k) v(k) = M(idx[k].first, idx[k].second);
        return v;
    };
    auto unpack = [&](const VectorXd& v) {
        MatrixXd M = MatrixXd::Zero(obj.rows(), obj.cols());
        for (int k = 0; k < dim; ++k) M(idx[k].first, idx[k].second) = v(k);
        return M;
    };

    const MatrixXd grad = support.mask(obj.gradient(V));
    const MatrixXd fallback = -grad;

    auto apply_hess = [&](const VectorXd& x) {
        return pack(support.mask(obj.hessian_product(V, unpack(x))));
    };

    // The Hessian can be near-singular (e.g. gain directions the disturbance
    // never excites); an unregularized solve then returns enormous steps along
    // those directions.  Regularize relative to the curvature seen along the
    // gradient, which leaves well-conditioned Newton steps essentially intact.
    const VectorXd g = pack(grad);
    const VectorXd Hg = apply_hess(g);
    const double curv_along_g = g.dot(Hg) / g.squaredNorm();
    if (!(curv_along_g > 0.0)) return fallback;
    const double delta = opts.tikhonov_rel * curv_along_g;

    LinearOperator hess;
    hess.dimension = dim;
    hess.apply = [&](const VectorXd& x) { return (apply_hess(x) + delta * x).eval(); };

    const int max_iter = opts.cg_max_iter > 0 ? opts.cg_max_iter : 4 * dim;
    const CgResult cg = cg_solve(hess, -g, opts.cg_tol, max_iter);
    if (cg.negative_curvature && cg.iterations == 0) return fallback;

    const MatrixXd step = unpack(cg.x);
    // Truncated or negative-curvature iterates must still descend.
    const double slope = (grad.array() * step.array()).sum();
    if (!(slope < 0.0)) return fallback;
    return step;
}

}  // namespace sparselqr
