#pragma once

#include <memory>
#include <vector>

#include "sparselqr/system_model.hpp"

namespace sparselqr {

struct DesignWeights {
    MatrixXd Q;  // m x m, symmetric PSD
    MatrixXd R;  // q x q, symmetric PD

    DesignWeights() = default;
    DesignWeights(MatrixXd q, MatrixXd r);  // validates symmetry and definiteness
};

struct AgentWeights {
    std::vector<MatrixXd> Q;  // per agent, m x m PSD
    std::vector<MatrixXd> R;  // per agent, N_i x N_i PD
    bool sum_matches_social = false;

    // Certifies sum(Q_i) == social Q and R == blkdiag(R_i) to 1e-10.
    void certify(const DesignWeights& social, const AgentPartition& part);
};

struct ObjectiveEvaluation {
    double value = 0.0;
    MatrixXd P;  // left-transpose Lyapunov solution
    MatrixXd L;  // right-transpose Lyapunov solution (gradient reuse)
};

// Closed-loop impulse energy J(K) = D^T P D and its gradient 2(RK - B^T P)L.
ObjectiveEvaluation social_value(const LtiSystem& sys, const DesignWeights& w,
                                 const FeedbackGain& K);
MatrixXd social_gradient(const LtiSystem& sys, const DesignWeights& w, const FeedbackGain& K);

ObjectiveEvaluation selfish_value(const LtiSystem& sys, const AgentPartition& part,
                                  const AgentWeights& aw, int agent, const FeedbackGain& K);
MatrixXd selfish_gradient(const LtiSystem& sys, const AgentPartition& part,
                          const AgentWeights& aw, int agent, const FeedbackGain& K);

// A smooth LQR objective in a matrix variable V (a row slice of K, or K
// itself).  Supplies exact gradients and Hessian-vector products from
// directional differentiation of the Lyapunov pair.
class SmoothObjective {
public:
    virtual ~SmoothObjective() = default;
    virtual int rows() const = 0;
    virtual int cols() const = 0;
    virtual bool stabilizing(const MatrixXd& V) const = 0;
    virtual double value(const MatrixXd& V) const = 0;  // throws UnstableClosedLoop
    virtual MatrixXd gradient(const MatrixXd& V) const = 0;
    virtual MatrixXd hessian_product(const MatrixXd& V, const MatrixXd& dir) const = 0;
};

// Social objective over the full gain K.  A positive gramian_shift optimizes
// the barrier-regularized cost tr(P (DD^T + shift ||D||^2 I)): modes feedback
// pushes toward the stability boundary then inflate the cost instead of
// riding it for free (the disturbance excites only a rank-one subspace).
class SocialObjective final : public SmoothObjective {
public:
    SocialObjective(const LtiSystem& sys, const DesignWeights& w, double gramian_shift = 0.0);
    int rows() const override;
    int cols() const override;
    bool stabilizing(const MatrixXd& V) const override;
    double value(const MatrixXd& V) const override;
    MatrixXd gradient(const MatrixXd& V) const override;
    MatrixXd hessian_product(const MatrixXd& V, const MatrixXd& dir) const override;

private:
    const LtiSystem& sys_;
    const DesignWeights& w_;
    double shift_abs_ = 0.0;
};

// Objective over a slice of K rows with the remaining rows held fixed.
class RowSliceObjective : public SmoothObjective {
public:
    virtual void set_fixed(const MatrixXd& K_full) = 0;       // refresh other rows
    virtual MatrixXd embed(const MatrixXd& V) const = 0;      // full K with slice = V
    virtual MatrixXd extract(const MatrixXd& K_full) const = 0;
    virtual const std::vector<int>& row_indices() const = 0;
};

// A player's selfish objective over a set of K rows with the other rows held
// fixed: weight Q_i + V^T R_i V on the global closed loop.
class PlayerObjective final : public RowSliceObjective {
public:
    PlayerObjective(const LtiSystem& sys, std::vector<int> row_indices, MatrixXd Qi, MatrixXd Ri,
                    MatrixXd K_fixed, double gramian_shift = 0.0);

    void set_fixed(const MatrixXd& K_full) override;
    MatrixXd embed(const MatrixXd& V) const override;
    MatrixXd extract(const MatrixXd& K_full) const override;
    const std::vector<int>& row_indices() const override { return rows_; }

    int rows() const override;
    int cols() const override;
    bool stabilizing(const MatrixXd& V) const override;
    double value(const MatrixXd& V) const override;
    MatrixXd gradient(const MatrixXd& V) const override;
    MatrixXd hessian_product(const MatrixXd& V, const MatrixXd& dir) const override;

private:
    MatrixXd closed_loop_fixed(const MatrixXd& V) const;  // A - sum_j B_j K^j

    const LtiSystem& sys_;
    std::vector<int> rows_;
    MatrixXd Qi_, Ri_;
    MatrixXd Bi_;       // columns of B owned by the player
    MatrixXd K_fixed_;  // full gain; player rows ignored
    double shift_abs_ = 0.0;
};

// A full-gain objective restricted to a set of K rows (potential-game move:
// the common social objective as a function of one player's rows).
class RowRestrictedObjective final : public RowSliceObjective {
public:
    RowRestrictedObjective(const SmoothObjective& full, std::vector<int> row_indices,
                           MatrixXd K_fixed);

    void set_fixed(const MatrixXd& K_full) override;
    MatrixXd embed(const MatrixXd& V) const override;
    MatrixXd extract(const MatrixXd& K_full) const override;
    const std::vector<int>& row_indices() const override { return rows_; }

    int rows() const override;
    int cols() const override;
    bool stabilizing(const MatrixXd& V) const override;
    double value(const MatrixXd& V) const override;
    MatrixXd gradient(const MatrixXd& V) const override;
    MatrixXd hessian_product(const MatrixXd& V, const MatrixXd& dir) const override;

private:
    MatrixXd embed_zero(const MatrixXd& V) const;  // zeros outside player rows

    const SmoothObjective& full_;
    std::vector<int> rows_;
    MatrixXd K_fixed_;
};

struct NewtonStepOptions {
    double cg_tol = 1e-8;
    int cg_max_iter = -1;  // default 4 x support size
    // Relative Tikhonov shift (scaled by the curvature along the gradient)
    // guarding against enormous steps along near-null Hessian directions.
    double tikhonov_rel = 1e-8;
};

// Newton direction restricted to `support`, via CG over Hessian-vector
// products.  Falls back to the projected steepest-descent direction on
// negative curvature or a non-descent CG outcome.
MatrixXd restricted_newton_step(const SmoothObjective& obj, const MatrixXd& V,
                                const SupportSet& support,
                                const NewtonStepOptions& opts = {});

}  // namespace sparselqr
