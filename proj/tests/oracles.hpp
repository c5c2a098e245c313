// Independent reference implementations used to pin expected values.  These
// deliberately avoid the library's solver code paths: Lyapunov equations are
// solved densely through the Kronecker form, energies by adaptive RK45
// quadrature of the closed-loop integrand, gradients by central differences,
// and Riccati solutions by Kleinman iteration seeded with a Bass-style
// stabilizing gain.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// vec(Y) from (I (x) A^T + A^T (x) I) vec(Y) = -vec(W), i.e. A^T Y + Y A = -W.
inline MatrixXd lyap_left_kron(const MatrixXd& A, const MatrixXd& W) {
    const int n = static_cast<int>(A.rows());
    MatrixXd M = MatrixXd::Zero(n * n, n * n);
    // vec is column-major: Y(i,j) -> index j*n + i.
    // (A^T Y)(i,j) = sum_k A(k,i) Y(k,j); (Y A)(i,j) = sum_k Y(i,k) A(k,j).
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int row = j * n + i;
            for (int k = 0; k < n; ++k) {
                M(row, j * n + k) += A(k, i);
                M(row, k * n + i) += A(k, j);
            }
        }
    VectorXd w(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) w(j * n + i) = W(i, j);
    const VectorXd y = M.fullPivLu().solve(-w);
    MatrixXd Y(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) Y(i, j) = y(j * n + i);
    return Y;
}

inline MatrixXd lyap_right_kron(const MatrixXd& A, const MatrixXd& W) {
    return lyap_left_kron(A.transpose(), W);
}

// Dormand-Prince RK45 with step doubling on |err| <= atol + rtol*|y|.
// Integrates y' = f(t, y) from t0 with y0 until `until` reports done.
inline VectorXd rk45(const std::function<VectorXd(const VectorXd&)>& f, VectorXd y,
                     double t_end, double rtol = 1e-10, double atol = 1e-13) {
    double t = 0.0, h = 1e-3;
    while (t < t_end) {
        if (t + h > t_end) h = t_end - t;
        const VectorXd k1 = f(y);
        const VectorXd k2 = f(y + h * (1.0 / 5.0) * k1);
        const VectorXd k3 = f(y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
        const VectorXd k4 = f(y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
        const VectorXd k5 =
            f(y + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3 -
                       212.0 / 729.0 * k4));
        const VectorXd k6 =
            f(y + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 +
                       49.0 / 176.0 * k4 - 5103.0 / 18656.0 * k5));
        const VectorXd y5 = y + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 -
                                     2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
        const VectorXd k7 = f(y5);
        const VectorXd y4 =
            y + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4 -
                     92097.0 / 339200.0 * k5 + 187.0 / 2100.0 * k6 + 1.0 / 40.0 * k7);
        const double err = (y5 - y4).norm();
        const double tol = atol + rtol * std::max(y.norm(), y5.norm());
        if (err <= tol || h < 1e-12) {
            t += h;
            y = y5;
        }
        const double scale = err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 2.0;
        h *= std::min(4.0, std::max(0.2, scale));
    }
    return y;
}

// Impulse-response energy: integral over [0, T] of x^T M x with x' = Acl x,
// x(0) = d, integrated as an augmented state.  T is chosen from the decay of
// the closed-loop modes.
inline double energy_quadrature(const MatrixXd& A_cl, const MatrixXd& M, const VectorXd& d) {
    const int n = static_cast<int>(A_cl.rows());
    double abscissa = -1e300;
    const Eigen::EigenSolver<MatrixXd> es(A_cl);
    for (int i = 0; i < n; ++i) abscissa = std::max(abscissa, es.eigenvalues()(i).real());
    if (abscissa >= 0.0) throw std::runtime_error("quadrature oracle: unstable closed loop");
    const double T = std::min(1e4, 40.0 / -abscissa);

    VectorXd y0(n + 1);
    y0.head(n) = d;
    y0(n) = 0.0;
    auto f = [&](const VectorXd& y) {
        VectorXd dy(n + 1);
        const VectorXd x = y.head(n);
        dy.head(n) = A_cl * x;
        dy(n) = x.dot(M * x);
        return dy;
    };
    return rk45(f, y0, T)(n);
}

inline MatrixXd finite_diff_gradient(const std::function<double(const MatrixXd&)>& f,
                                     const MatrixXd& V, double h = 1e-6) {
    MatrixXd g = MatrixXd::Zero(V.rows(), V.cols());
    for (int i = 0; i < V.rows(); ++i)
        for (int j = 0; j < V.cols(); ++j) {
            MatrixXd Vp = V, Vm = V;
            Vp(i, j) += h;
            Vm(i, j) -= h;
            g(i, j) = (f(Vp) - f(Vm)) / (2.0 * h);
        }
    return g;
}

// Bass-style stabilizing gain: with beta > ||A||, solve the stable Lyapunov
// equation -(A+bI)X - X(A+bI)^T + 2BB^T = 0 and take K = B^T X^{-1}.
inline MatrixXd bass_stabilizing_gain(const MatrixXd& A, const MatrixXd& B) {
    const int n = static_cast<int>(A.rows());
    const double beta = A.norm() + 1.0;
    const MatrixXd As = -(A + beta * MatrixXd::Identity(n, n));
    // As is Hurwitz; As^T X + X As = -2BB^T  =>  X solves the left form on As^T.
    const MatrixXd X = lyap_left_kron(As.transpose(), 2.0 * B * B.transpose());
    return B.transpose() * X.fullPivLu().solve(MatrixXd::Identity(n, n));
}

// Riccati solution by Kleinman iteration over the Kronecker Lyapunov oracle.
inline MatrixXd care_kleinman(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                              const MatrixXd& R) {
    MatrixXd K = bass_stabilizing_gain(A, B);
    const MatrixXd Rinv = R.fullPivLu().solve(MatrixXd::Identity(R.rows(), R.cols()));
    MatrixXd P;
    for (int it = 0; it < 100; ++it) {
        const MatrixXd Acl = A - B * K;
        P = lyap_left_kron(Acl, Q + K.transpose() * R * K);
        const MatrixXd K_next = Rinv * B.transpose() * P;
        const double delta = (K_next - K).norm() / std::max(1.0, K.norm());
        K = K_next;
        if (delta < 1e-14) break;
    }
    return P;
}

inline MatrixXd care_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                          const MatrixXd& R) {
    const MatrixXd P = care_kleinman(A, B, Q, R);
    return R.fullPivLu().solve(B.transpose() * P);
}

// Random Hurwitz matrix: random entries shifted left past the spectral
// abscissa.
inline MatrixXd random_stable(std::mt19937& rng, int n) {
    std::normal_distribution<double> g(0.0, 1.0);
    MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = g(rng);
    double abscissa = -1e300;
    const Eigen::EigenSolver<MatrixXd> es(A);
    for (int i = 0; i < n; ++i) abscissa = std::max(abscissa, es.eigenvalues()(i).real());
    A -= (abscissa + 0.5) * MatrixXd::Identity(n, n);
    return A;
}

inline MatrixXd random_matrix(std::mt19937& rng, int rows, int cols, double sigma = 1.0) {
    std::normal_distribution<double> g(0.0, sigma);
    MatrixXd M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) M(i, j) = g(rng);
    return M;
}

inline MatrixXd random_spd(std::mt19937& rng, int n, double ridge = 0.1) {
    const MatrixXd G = random_matrix(rng, n, n);
    return G * G.transpose() / n + ridge * MatrixXd::Identity(n, n);
}

}  // namespace oracles
