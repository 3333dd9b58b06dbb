// Independent reference implementations used only by the tests. Everything
// here deliberately avoids the library's own code paths: dense eigensolves go
// through Eigen, recursions are replayed on scalars, and gradients come from
// finite differences.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "tp/dataio.hpp"
#include "tp/numkit.hpp"

namespace oracles {

inline std::string data_dir() {
    const char* env = std::getenv("TP_DATA_DIR");
    return env ? env : "data";
}

// Largest eigenvalue of a dense symmetric matrix.
inline double dense_lambda_max(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    return solver.eigenvalues().maxCoeff();
}

// lambda_max(A' A) for a CSR matrix, via the dense Gram matrix on the smaller
// side (the nonzero spectra of A'A and AA' coincide).
inline double dense_gram_lambda_max(const tp::SparseMatrixCSR& A) {
    const bool use_rows = A.n_rows <= A.n_cols;
    const auto n = static_cast<Eigen::Index>(use_rows ? A.n_rows : A.n_cols);
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(
        static_cast<Eigen::Index>(A.n_rows), static_cast<Eigen::Index>(A.n_cols));
    for (std::int64_t i = 0; i < A.n_rows; ++i)
        for (std::int64_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k)
            dense(static_cast<Eigen::Index>(i), A.col_indices[k]) = A.values[k];
    Eigen::MatrixXd gram(n, n);
    if (use_rows)
        gram = dense * dense.transpose();
    else
        gram = dense.transpose() * dense;
    return dense_lambda_max(gram);
}

// Central finite difference of f along direction u.
inline double finite_difference(const std::function<double(const tp::Vec&)>& f,
                                const tp::Vec& x, const tp::Vec& u, double h) {
    tp::Vec xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] += h * u[i];
        xm[i] -= h * u[i];
    }
    return (f(xp) - f(xm)) / (2.0 * h);
}

// Scalar replay of the twin dynamics on an isotropic quadratic: the moving
// sequence's squared M-norm becomes t^2/s. Returns the per-step max(f)-offset
// values.
inline std::vector<double> twin_quadratic_recursion(double s0, double t0, int steps) {
    std::vector<double> out;
    double s = s0, t = t0;
    for (int k = 0; k < steps; ++k) {
        if (s > t)
            s = t * t / s;
        else
            t = s * s / t;
        out.push_back(0.5 * std::max(s, t));
    }
    return out;
}

// Smallest backtracking exponent j with f(x - eta_max beta^j g) satisfying the
// sufficient-decrease condition, found by brute-force scan.
inline int armijo_scan(const std::function<double(double)>& f1d, double x, double g,
                       double eta_max, double beta, double c, int cap = 500) {
    const double fx = f1d(x);
    for (int j = 0; j <= cap; ++j) {
        const double eta = eta_max * std::pow(beta, j);
        if (f1d(x - eta * g) <= fx - c * eta * g * g) return j;
    }
    return -1;
}

// Replays the momentum recursions of the stochastic twin surrogate on scalars
// (1-D quantities per twin), fully independently of the stepper.
struct EmaReplay {
    double fbar_x = 0, fbar_y = 0, z_x = 0, z_y = 0;
    std::vector<double> g_x, g_y;
    bool init = false;

    struct Out {
        double h_x, h_y, eta;
        bool x_moves;
    };

    Out feed(double alpha, double fx, double fy, const std::vector<double>& gx,
             const std::vector<double>& gy, const std::vector<double>& px,
             const std::vector<double>& py) {
        auto dotv = [](const std::vector<double>& a, const std::vector<double>& b) {
            double s = 0;
            for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
            return s;
        };
        if (!init) {
            fbar_x = fx;
            fbar_y = fy;
            g_x = gx;
            g_y = gy;
            z_x = dotv(gx, px);
            z_y = dotv(gy, py);
            init = true;
        } else {
            fbar_x = alpha * fbar_x + (1 - alpha) * fx;
            fbar_y = alpha * fbar_y + (1 - alpha) * fy;
            for (std::size_t i = 0; i < gx.size(); ++i) {
                g_x[i] = alpha * g_x[i] + (1 - alpha) * gx[i];
                g_y[i] = alpha * g_y[i] + (1 - alpha) * gy[i];
            }
            z_x = alpha * z_x + (1 - alpha) * dotv(gx, px);
            z_y = alpha * z_y + (1 - alpha) * dotv(gy, py);
        }
        const double h_x = fbar_x + dotv(g_x, px) - z_x;
        const double h_y = fbar_y + dotv(g_y, py) - z_y;
        const bool x_moves = h_x >= h_y;
        const auto& gm = x_moves ? g_x : g_y;
        const double eta = 2.0 * std::abs(h_x - h_y) / dotv(gm, gm);
        return {h_x, h_y, eta, x_moves};
    }
};

// High-accuracy logistic minimizer by damped Newton with a dense Hessian;
// independent of the gradient-descent certificate it cross-checks.
inline double newton_logistic_fstar(const tp::SparseDataset& ds, int iters = 60) {
    const auto n = static_cast<Eigen::Index>(ds.n_examples());
    const auto d = static_cast<Eigen::Index>(ds.n_features());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, d);
    Eigen::VectorXd b(n);
    for (std::int64_t i = 0; i < ds.n_examples(); ++i) {
        b(static_cast<Eigen::Index>(i)) = ds.labels[i];
        for (std::int64_t k = ds.features.row_offsets[i]; k < ds.features.row_offsets[i + 1]; ++k)
            A(static_cast<Eigen::Index>(i), ds.features.col_indices[k]) = ds.features.values[k];
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    const double inv_n = 1.0 / static_cast<double>(n);
    auto value = [&](const Eigen::VectorXd& v) {
        const Eigen::ArrayXd t = -(b.array() * (A * v).array());
        return (t.max(0.0) + (-t.abs()).exp().log1p()).sum() * inv_n;
    };
    double fx = value(x);
    for (int it = 0; it < iters; ++it) {
        const Eigen::ArrayXd margins = (A * x).array() * b.array();
        const Eigen::ArrayXd sig = 1.0 / (1.0 + margins.exp());  // sigma(-b<a,x>)
        const Eigen::VectorXd grad = -inv_n * (A.transpose() * (b.array() * sig).matrix());
        const Eigen::ArrayXd w = sig * (1.0 - sig);
        Eigen::MatrixXd H = inv_n * (A.transpose() * w.matrix().asDiagonal() * A);
        H.diagonal().array() += 1e-12;
        const Eigen::VectorXd step = H.ldlt().solve(grad);
        double damp = 1.0;
        for (int bt = 0; bt < 60; ++bt) {
            const Eigen::VectorXd trial = x - damp * step;
            const double ft = value(trial);
            if (ft < fx) {
                x = trial;
                fx = ft;
                break;
            }
            damp *= 0.5;
        }
    }
    return fx;
}

}  // namespace oracles
