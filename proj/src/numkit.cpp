#include "tp/numkit.hpp"

#include <cmath>
#include <string>

#include "tp/rng.hpp"

namespace tp {

namespace {

void require_same_length(const Vec& u, const Vec& v, const char* op) {
    if (u.size() != v.size()) {
        throw DimensionError(std::string(op) + ": length mismatch (" +
                             std::to_string(u.size()) + " vs " +
                             std::to_string(v.size()) + ")");
    }
}

}  // namespace

void SparseMatrixCSR::validate() const {
    if (n_rows < 0 || n_cols < 0) throw DimensionError("csr: negative shape");
    if (row_offsets.size() != static_cast<std::size_t>(n_rows) + 1)
        throw DimensionError("csr: row_offsets length != n_rows + 1");
    if (row_offsets.front() != 0)
        throw DimensionError("csr: row_offsets[0] != 0");
    if (row_offsets.back() != nnz())
        throw DimensionError("csr: row_offsets[n] != nnz");
    if (col_indices.size() != values.size())
        throw DimensionError("csr: col_indices/values length mismatch");
    for (std::int64_t i = 0; i < n_rows; ++i) {
        if (row_offsets[i] > row_offsets[i + 1])
            throw DimensionError("csr: row_offsets not nondecreasing at row " +
                                 std::to_string(i));
        for (std::int64_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
            if (col_indices[k] < 0 || col_indices[k] >= n_cols)
                throw DimensionError("csr: column index out of range at row " +
                                     std::to_string(i));
            if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1])
                throw DimensionError("csr: column indices not strictly increasing in row " +
                                     std::to_string(i));
        }
    }
}

double dot(const Vec& u, const Vec& v) {
    require_same_length(u, v, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double norm_sq(const Vec& v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return s;
}

bool all_finite(const Vec& v) {
    for (double c : v)
        if (!std::isfinite(c)) return false;
    return true;
}

Vec axpy(double alpha, const Vec& u, const Vec& v) {
    require_same_length(u, v, "axpy");
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] + alpha * u[i];
    if (!all_finite(out)) throw NumericError("axpy: non-finite result");
    return out;
}

void axpy_inplace(double alpha, const Vec& u, Vec& v) {
    require_same_length(u, v, "axpy");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += alpha * u[i];
    if (!all_finite(v)) throw NumericError("axpy: non-finite result");
}

void scale_inplace(double alpha, Vec& v) {
    for (double& c : v) c *= alpha;
}

double row_dot(const SparseMatrixCSR& A, std::int64_t row, const Vec& x) {
    double s = 0.0;
    for (std::int64_t k = A.row_offsets[row]; k < A.row_offsets[row + 1]; ++k)
        s += A.values[k] * x[A.col_indices[k]];
    return s;
}

void row_axpy(const SparseMatrixCSR& A, std::int64_t row, double coef, Vec& out) {
    for (std::int64_t k = A.row_offsets[row]; k < A.row_offsets[row + 1]; ++k)
        out[A.col_indices[k]] += coef * A.values[k];
}

Vec spmv(const SparseMatrixCSR& A, const Vec& x) {
    if (static_cast<std::int64_t>(x.size()) != A.n_cols)
        throw DimensionError("spmv: x length != n_cols");
    Vec out(A.n_rows, 0.0);
    for (std::int64_t i = 0; i < A.n_rows; ++i) out[i] = row_dot(A, i, x);
    return out;
}

Vec spmv_transpose(const SparseMatrixCSR& A, const Vec& r) {
    if (static_cast<std::int64_t>(r.size()) != A.n_rows)
        throw DimensionError("spmv_transpose: r length != n_rows");
    Vec out(A.n_cols, 0.0);
    for (std::int64_t i = 0; i < A.n_rows; ++i) row_axpy(A, i, r[i], out);
    return out;
}

double power_iteration_sym(const std::function<void(const Vec&, Vec&)>& apply,
                           std::int64_t d, double tol, std::int64_t max_iter,
                           std::uint64_t seed) {
    if (tol <= 0.0) throw ConfigError("power_iteration: tol must be positive");
    if (d <= 0) throw DimensionError("power_iteration: d must be positive");
    Rng rng = Rng::stream(seed, 0x9077e2);
    Vec v = rng.gaussian_vector(static_cast<std::size_t>(d));
    {
        const double n = std::sqrt(norm_sq(v));
        scale_inplace(1.0 / n, v);
    }
    Vec w(static_cast<std::size_t>(d));
    double lambda = 0.0;
    for (std::int64_t it = 0; it < max_iter; ++it) {
        apply(v, w);
        const double wn = std::sqrt(norm_sq(w));
        if (wn == 0.0) return 0.0;  // operator annihilated v: zero operator on its range
        lambda = dot(v, w);         // Rayleigh quotient (v is unit)
        double res = 0.0;
        for (std::int64_t i = 0; i < d; ++i) {
            const double e = w[i] - lambda * v[i];
            res += e * e;
        }
        if (std::sqrt(res) <= tol * std::abs(lambda)) return lambda;
        for (std::int64_t i = 0; i < d; ++i) v[i] = w[i] / wn;
    }
    throw ConvergenceError("power_iteration: no convergence after " +
                               std::to_string(max_iter) + " iterations",
                           lambda);
}

}  // namespace tp
