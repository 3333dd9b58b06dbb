#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tp/numkit.hpp"
#include "tp/rng.hpp"

using namespace tp;

namespace {

SparseMatrixCSR make_csr(std::int64_t rows, std::int64_t cols,
                         const std::vector<std::vector<std::pair<std::int32_t, double>>>& data) {
    SparseMatrixCSR A;
    A.n_rows = rows;
    A.n_cols = cols;
    A.row_offsets.push_back(0);
    for (const auto& row : data) {
        for (const auto& [c, v] : row) {
            A.col_indices.push_back(c);
            A.values.push_back(v);
        }
        A.row_offsets.push_back(A.nnz());
    }
    A.validate();
    return A;
}

}  // namespace

TEST_CASE("dot basics") {
    CHECK(dot({1, 2}, {3, 4}) == 11.0);
    CHECK(dot({0, 0}, {5, 9}) == 0.0);
    CHECK(dot({1, -1}, {1, 1}) == 0.0);
    CHECK_THROWS_AS(dot({1}, {1, 2}), DimensionError);
}

TEST_CASE("dot is symmetric exactly") {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        const Vec u = rng.gaussian_vector(17);
        const Vec v = rng.gaussian_vector(17);
        CHECK(dot(u, v) == dot(v, u));
    }
}

TEST_CASE("axpy") {
    CHECK(axpy(-0.5, {2, 0}, {2, 0}) == Vec{1, 0});
    CHECK(axpy(0.0, {7, -3}, {3, 4}) == Vec{3, 4});
    CHECK(axpy(1.0, {1, 1}, {-1, -1}) == Vec{0, 0});
    CHECK_THROWS_AS(axpy(1.0, {1}, {1, 2}), DimensionError);
    CHECK_THROWS_AS(axpy(1e308, {1e308, 0}, {1e308, 0}), NumericError);
}

TEST_CASE("spmv cases") {
    const auto A = make_csr(2, 2, {{{0, 1.0}}, {{1, 2.0}}});
    CHECK(spmv(A, {3, 4}) == Vec{3, 8});

    const auto empty_row = make_csr(2, 2, {{}, {{0, 1.0}, {1, 1.0}}});
    CHECK(spmv(empty_row, {5, 7}) == Vec{0, 12});

    const auto wide = make_csr(1, 2, {{{0, 1.0}, {1, 1.0}}});
    CHECK(spmv(wide, {1, 1}) == Vec{2});
    CHECK_THROWS_AS(spmv(wide, {1, 1, 1}), DimensionError);
}

TEST_CASE("spmv_transpose cases") {
    const auto A = make_csr(2, 2, {{{0, 1.0}}, {{1, 2.0}}});
    CHECK(spmv_transpose(A, {1, 1}) == Vec{1, 2});
    CHECK(spmv_transpose(A, {0, 0}) == Vec{0, 0});
    const auto wide = make_csr(1, 2, {{{0, 1.0}, {1, 1.0}}});
    CHECK(spmv_transpose(wide, {3}) == Vec{3, 3});
    CHECK_THROWS_AS(spmv_transpose(wide, {1, 2}), DimensionError);
}

TEST_CASE("spmv_transpose is the adjoint of spmv") {
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        const auto rows = 1 + rng.below(8);
        const auto cols = 1 + rng.below(8);
        std::vector<std::vector<std::pair<std::int32_t, double>>> data(rows);
        for (auto& row : data)
            for (std::int64_t c = 0; c < static_cast<std::int64_t>(cols); ++c)
                if (rng.uniform01() < 0.5)
                    row.emplace_back(static_cast<std::int32_t>(c), rng.normal());
        const auto A = make_csr(static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols),
                                data);
        const Vec x = rng.gaussian_vector(cols);
        const Vec r = rng.gaussian_vector(rows);
        const double lhs = dot(spmv(A, x), r);
        const double rhs = dot(x, spmv_transpose(A, r));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));
    }
}

TEST_CASE("csr validation rejects broken structures") {
    SparseMatrixCSR A;
    A.n_rows = 1;
    A.n_cols = 2;
    A.row_offsets = {0, 2};
    A.col_indices = {1, 0};  // not increasing
    A.values = {1.0, 2.0};
    CHECK_THROWS_AS(A.validate(), DimensionError);
    A.col_indices = {0, 5};  // out of range
    CHECK_THROWS_AS(A.validate(), DimensionError);
}

TEST_CASE("power iteration on a diagonal operator") {
    auto apply = [](const Vec& v, Vec& out) {
        out = {3.0 * v[0], 1.0 * v[1]};
    };
    const double lambda = power_iteration_sym(apply, 2, 1e-10, 100000, 0);
    CHECK(lambda == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("power iteration on the zero operator") {
    auto apply = [](const Vec& v, Vec& out) { out.assign(v.size(), 0.0); };
    CHECK(power_iteration_sym(apply, 4, 1e-10, 100, 1) == 0.0);
}

TEST_CASE("power iteration non-convergence carries the last estimate") {
    auto apply = [](const Vec& v, Vec& out) {
        out = {2.0 * v[0], 1.999999 * v[1]};
    };
    try {
        power_iteration_sym(apply, 2, 1e-15, 3, 2);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.last_estimate > 1.0);
        CHECK(e.last_estimate < 2.1);
    }
}

TEST_CASE("power iteration matches the dense eigensolver oracle on random PSD") {
    Rng rng(99);
    for (int t = 0; t < 20; ++t) {
        const int d = 10;
        Eigen::MatrixXd B(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) B(i, j) = rng.normal();
        Eigen::MatrixXd S = B * B.transpose();  // PSD

        auto apply = [&](const Vec& v, Vec& out) {
            Eigen::Map<const Eigen::VectorXd> vm(v.data(), d);
            Eigen::VectorXd r = S * vm;
            out.assign(r.data(), r.data() + d);
        };
        const double expect = oracles::dense_lambda_max(S);
        const double got = power_iteration_sym(apply, d, 1e-12, 200000, 7 + t);
        CHECK(got == doctest::Approx(expect).epsilon(1e-8));
    }
}

TEST_CASE("rng determinism and shuffle") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng s1 = Rng::stream(3, 1);
    Rng s2 = Rng::stream(3, 2);
    CHECK(s1.next_u64() != s2.next_u64());

    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
    Rng c(0), d(0);
    auto v2 = v;
    c.shuffle(v);
    d.shuffle(v2);
    CHECK(v == v2);
}
