#include "sparselqr/matrix_kernels.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <limits>

namespace sparselqr {

namespace {

using Eigen::MatrixXcd;

// Solves T^H Y + Y T + C = 0 with T upper triangular (complex Schur form).
MatrixXcd solve_triangular_lyapunov(const MatrixXcd& T, const MatrixXcd& C) {
    const auto n = T.rows();
    MatrixXcd Y = MatrixXcd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            std::complex<double> acc = C(i, j);
            for (Eigen::Index k = 0; k < i; ++k) acc += std::conj(T(k, i)) * Y(k, j);
            for (Eigen::Index k = 0; k < j; ++k) acc += Y(i, k) * T(k, j);
            const std::complex<double> denom = std::conj(T(i, i)) + T(j, j);
            if (std::abs(denom) < 1e-14) {
                throw NotHurwitzError("solve_lyapunov: eigenvalue pair sums to zero");
            }
            Y(i, j) = -acc / denom;
        }
    }
    return Y;
}

// Schur decompositions are the dominant cost of the solver inner loops, and
// the same closed-loop matrix is factored over and over: every CG iteration
// of a Newton solve asks for Lyapunov solves at the same iterate, and a
// stability probe is usually followed immediately by a value evaluation at
// the same point.  A tiny thread-local cache keyed on exact matrix equality
// removes the recomputation without changing any numerical result.
struct SchurEntry {
    MatrixXd A;
    MatrixXcd T;
    MatrixXcd U;
    double abscissa = 0.0;
    bool valid = false;
};

constexpr std::size_t kSchurCacheSize = 6;
thread_local SchurEntry g_schur_cache[kSchurCacheSize];
thread_local std::size_t g_schur_next = 0;

const SchurEntry& schur_entry(const MatrixXd& A) {
    for (const SchurEntry& e : g_schur_cache) {
        if (e.valid && e.A.rows() == A.rows() && e.A.cols() == A.cols() &&
            (e.A.array() == A.array()).all()) {
            return e;
        }
    }
    Eigen::ComplexSchur<MatrixXd> schur(A);
    if (schur.info() != Eigen::Success) {
        throw EigenFailureError("spectral_abscissa: Schur decomposition failed");
    }
    SchurEntry& e = g_schur_cache[g_schur_next];
    g_schur_next = (g_schur_next + 1) % kSchurCacheSize;
    e.A = A;
    e.T = schur.matrixT();
    e.U = schur.matrixU();
    e.abscissa = e.T.diagonal().real().maxCoeff();
    e.valid = true;
    return e;
}

MatrixXd lyapunov_left(const MatrixXd& A, const MatrixXd& W) {
    const SchurEntry& e = schur_entry(A);
    const MatrixXcd C = e.U.adjoint() * W.cast<std::complex<double>>() * e.U;
    const MatrixXcd Y = solve_triangular_lyapunov(e.T, C);
    return (e.U * Y * e.U.adjoint()).real();
}

void check_lyapunov_preconditions(const MatrixXd& A, const MatrixXd& W) {
    if (A.rows() != A.cols() || W.rows() != W.cols() || A.rows() != W.rows()) {
        throw InvalidParamsError("solve_lyapunov: dimension mismatch");
    }
    if (spectral_abscissa(A) >= 0.0) {
        throw NotHurwitzError("solve_lyapunov: closed-loop matrix is not Hurwitz");
    }
}

}  // namespace

double spectral_abscissa(const MatrixXd& M) {
    if (M.rows() != M.cols()) throw InvalidParamsError("spectral_abscissa: matrix not square");
    if (M.rows() == 0) throw InvalidParamsError("spectral_abscissa: empty matrix");
    if (!M.allFinite()) throw InvalidParamsError("spectral_abscissa: non-finite entries");
    return schur_entry(M).abscissa;
}

MatrixXd solve_lyapunov(const MatrixXd& A_cl, const MatrixXd& W, LyapunovSide side) {
    check_lyapunov_preconditions(A_cl, W);
    const MatrixXd X = side == LyapunovSide::LeftTranspose
                           ? lyapunov_left(A_cl, W)
                           : lyapunov_left(A_cl.transpose(), W);
    // Check conditioning against the raw (unsymmetrized) solution.  When W is
    // roundoff-sized its antisymmetric part is the same order as W itself, so
    // the symmetrized X would fail the check even though the solve is accurate
    // to machine precision.  W is symmetric by contract, so symmetrizing X
    // only discards the antisymmetric roundoff component.
    const MatrixXd residual = side == LyapunovSide::LeftTranspose
                                  ? (A_cl.transpose() * X + X * A_cl + W).eval()
                                  : (A_cl * X + X * A_cl.transpose() + W).eval();
    const double scale = std::max(W.norm() + 2.0 * A_cl.norm() * X.norm(), 1e-30);
    if (residual.norm() > 1e-9 * scale) {
        throw IllConditionedError("solve_lyapunov: residual exceeds tolerance");
    }
    return 0.5 * (X + X.transpose());
}

CareSolution solve_care(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                        const MatrixXd& R) {
    const auto n = A.rows();
    if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
        R.rows() != B.cols() || R.cols() != B.cols()) {
        throw InvalidParamsError("solve_care: dimension mismatch");
    }
    const MatrixXd Rinv = R.llt().solve(MatrixXd::Identity(R.rows(), R.cols()));
    const MatrixXd S = B * Rinv * B.transpose();

    MatrixXd H(2 * n, 2 * n);
    H << A, -S, -Q, -A.transpose();

    Eigen::EigenSolver<MatrixXd> es(H);
    if (es.info() != Eigen::Success) {
        throw NumericalFailureError("solve_care: Hamiltonian eigensolver failed");
    }

    // Stable invariant subspace: eigenvectors for Re(lambda) < 0.
    MatrixXcd basis(2 * n, n);
    Eigen::Index count = 0;
    for (Eigen::Index k = 0; k < 2 * n; ++k) {
        if (es.eigenvalues()(k).real() < 0.0) {
            if (count >= n) {
                throw NumericalFailureError("solve_care: too many stable eigenvalues");
            }
            basis.col(count++) = es.eigenvectors().col(k);
        }
    }
    if (count != n) {
        throw NotStabilizableError("solve_care: stable subspace has wrong dimension");
    }

    const MatrixXcd X1 = basis.topRows(n);
    const MatrixXcd X2 = basis.bottomRows(n);
    Eigen::FullPivLU<MatrixXcd> lu(X1);
    if (!lu.isInvertible()) {
        throw NotStabilizableError("solve_care: singular subspace basis");
    }
    MatrixXd P = (X2 * lu.inverse()).real();
    P = 0.5 * (P + P.transpose()).eval();

    MatrixXd K = Rinv * B.transpose() * P;
    if (spectral_abscissa(A - B * K) >= 0.0) {
        throw NotStabilizableError("solve_care: subspace solution is not stabilizing");
    }

    // Kleinman refinement: Newton steps on the Riccati residual.
    for (int iter = 0; iter < 30; ++iter) {
        const MatrixXd Acl = A - B * K;
        const MatrixXd W = Q + K.transpose() * R * K;
        const MatrixXd Pn = lyapunov_left(Acl, W);
        const MatrixXd Kn = Rinv * B.transpose() * Pn;
        const double delta = (Pn - P).norm();
        P = Pn;
        K = Kn;
        if (delta <= 1e-13 * std::max(1.0, P.norm())) break;
    }
    P = 0.5 * (P + P.transpose()).eval();
    K = Rinv * B.transpose() * P;

    const MatrixXd residual =
        A.transpose() * P + P * A - P * S * P + Q;
    const double scale = std::max({Q.norm(), (P * S * P).norm(), 1.0});
    if (residual.norm() > 1e-8 * scale) {
        throw NumericalFailureError("solve_care: Riccati residual above tolerance");
    }
    if (spectral_abscissa(A - B * K) >= 0.0) {
        throw NumericalFailureError("solve_care: refined gain is not stabilizing");
    }
    return {P, K};
}

CgResult cg_solve(const LinearOperator& op, const VectorXd& rhs, double tol, int max_iter) {
    if (op.dimension != rhs.size()) {
        throw InvalidParamsError("cg_solve: rhs dimension does not match operator");
    }
    if (max_iter < 0) max_iter = 4 * op.dimension;

    CgResult res;
    res.x = VectorXd::Zero(op.dimension);
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        res.converged = true;
        return res;
    }

    VectorXd r = rhs;
    VectorXd p = r;
    double rr = r.squaredNorm();
    for (int it = 0; it < max_iter; ++it) {
        const VectorXd Ap = op.apply(p);
        const double curvature = p.dot(Ap);
        if (curvature <= 0.0) {
            res.negative_curvature = true;
            res.iterations = it;
            return res;
        }
        const double alpha = rr / curvature;
        res.x += alpha * p;
        r -= alpha * Ap;
        const double rr_new = r.squaredNorm();
        res.iterations = it + 1;
        if (std::sqrt(rr_new) <= tol * rhs_norm) {
            res.converged = true;
            return res;
        }
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    return res;  // MaxIterExceeded: best iterate with converged=false
}

}  // namespace sparselqr
