#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tp/errors.hpp"

namespace tp {

using Vec = std::vector<double>;

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row; duplicate entries are resolved (summed) at load time.
struct SparseMatrixCSR {
    std::vector<std::int64_t> row_offsets;  // length n_rows + 1
    std::vector<std::int32_t> col_indices;
    Vec values;
    std::int64_t n_rows = 0;
    std::int64_t n_cols = 0;

    std::int64_t nnz() const { return static_cast<std::int64_t>(values.size()); }

    // Throws if the CSR invariants are violated.
    void validate() const;
};

double dot(const Vec& u, const Vec& v);
double norm_sq(const Vec& v);

/// v + alpha * u, coordinatewise. Throws NumericError if the result is not finite.
Vec axpy(double alpha, const Vec& u, const Vec& v);

/// v += alpha * u in place; same finiteness contract as axpy.
void axpy_inplace(double alpha, const Vec& u, Vec& v);

void scale_inplace(double alpha, Vec& v);

bool all_finite(const Vec& v);

Vec spmv(const SparseMatrixCSR& A, const Vec& x);

Vec spmv_transpose(const SparseMatrixCSR& A, const Vec& r);

/// Row inner product <a_i, x>.
double row_dot(const SparseMatrixCSR& A, std::int64_t row, const Vec& x);

/// out += coef * a_i.
void row_axpy(const SparseMatrixCSR& A, std::int64_t row, double coef, Vec& out);

/// Dominant eigenvalue of a symmetric PSD operator on R^d via power iteration.
/// Convergence: residual ||Av - lambda v|| <= tol * |lambda| with lambda the
/// Rayleigh quotient. Deterministic for a fixed seed. Throws ConvergenceError
/// (carrying the last estimate) if max_iter is exhausted.
double power_iteration_sym(const std::function<void(const Vec&, Vec&)>& apply,
                           std::int64_t d, double tol, std::int64_t max_iter,
                           std::uint64_t seed);

}  // namespace tp
