#pragma once

#include <Eigen/Dense>
#include <functional>

#include "sparselqr/errors.hpp"

namespace sparselqr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Which side of the closed-loop matrix carries the transpose.
enum class LyapunovSide {
    LeftTranspose,   // A^T X + X A + W = 0
    RightTranspose,  // A X + X A^T + W = 0
};

// Largest real part over the eigenvalues of M.
double spectral_abscissa(const MatrixXd& M);

// Solves the continuous Lyapunov equation for Hurwitz A_cl by complex Schur
// reduction and triangular back-substitution. W must be symmetric.
MatrixXd solve_lyapunov(const MatrixXd& A_cl, const MatrixXd& W, LyapunovSide side);

struct CareSolution {
    MatrixXd P;        // stabilizing solution, symmetric PSD
    MatrixXd K_dense;  // R^{-1} B^T P
};

// Stabilizing solution of A^T P + P A - P B R^{-1} B^T P + Q = 0 via the
// Hamiltonian invariant-subspace method, refined by Kleinman iteration.
CareSolution solve_care(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                        const MatrixXd& R);

// Symmetric linear operator on R^dim.
struct LinearOperator {
    int dimension = 0;
    std::function<VectorXd(const VectorXd&)> apply;
};

struct CgResult {
    VectorXd x;
    int iterations = 0;
    bool converged = false;
    bool negative_curvature = false;
};

// Conjugate gradients for op(x) = rhs with op symmetric.  Stops early when a
// direction of nonpositive curvature is encountered and returns the current
// iterate flagged negative_curvature.
CgResult cg_solve(const LinearOperator& op, const VectorXd& rhs, double tol = 1e-8,
                  int max_iter = -1);

}  // namespace sparselqr
