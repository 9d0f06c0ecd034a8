#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "qhpm/dense.hpp"
#include "qhpm/sparse_matrix.hpp"

using namespace qhpm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SparseMatrix upper_2x2() { return SparseMatrix::from_triplets(2, 2, {{0, 0, -1.0}, {0, 1, 0.2}, {1, 1, -2.0}}); }

SparseMatrix random_sparse(std::mt19937_64& rng, std::size_t r, std::size_t c, double density) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::bernoulli_distribution keep(density);
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            if (keep(rng)) t.push_back({i, j, u(rng)});
        }
    }
    return SparseMatrix::from_triplets(r, c, t);
}

}  // namespace

TEST_CASE("duplicate triplets are summed and cancelling pairs dropped") {
    const auto m = SparseMatrix::from_triplets(2, 3, {{0, 1, 1.5}, {0, 1, 2.5}, {1, 2, 1.0}, {1, 2, -1.0}, {1, 0, 3.0}});
    CHECK(m.nnz() == 2);
    CHECK(m.at(0, 1) == 4.0);
    CHECK(m.at(1, 2) == 0.0);
    CHECK(m.at(1, 0) == 3.0);
}

TEST_CASE("out-of-range triplets are rejected") {
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), Error);
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{0, 5, 1.0}}), Error);
}

TEST_CASE("csr input must have increasing columns") {
    CHECK_THROWS_AS(SparseMatrix::from_csr(1, 3, {0, 2}, {2, 1}, {1.0, 1.0}), Error);
    const auto ok = SparseMatrix::from_csr(1, 3, {0, 2}, {0, 2}, {1.0, 2.0});
    CHECK(ok.at(0, 2) == 2.0);
}

TEST_CASE("row and column counts give the sparsity") {
    const auto m = SparseMatrix::from_triplets(3, 3, {{0, 0, 1}, {1, 0, 1}, {2, 0, 1}, {2, 1, 1}});
    CHECK(m.max_row_nnz() == 2);
    CHECK(m.max_col_nnz() == 3);
    CHECK(m.sparsity() == 3);
    CHECK(m.col_counts() == std::vector<std::size_t>{3, 1, 0});
}

TEST_CASE("spmv on small fixed cases") {
    CHECK(spmv(SparseMatrix::identity(3), Vector{1, 2, 3}) == Vector{1, 2, 3});
    const auto f1 = SparseMatrix::from_triplets(1, 1, {{0, 0, -1.0}});
    CHECK(spmv(f1, Vector{0.5}) == Vector{-0.5});
    const auto y = spmv(upper_2x2(), Vector{0.5, 0.25});
    CHECK_THAT(y[0], WithinAbs(-0.45, 1e-15));
    CHECK_THAT(y[1], WithinAbs(-0.5, 1e-15));
    CHECK_THROWS_AS(spmv(f1, Vector{1.0, 2.0}), Error);
}

TEST_CASE("spmv agrees with the dense product on random matrices") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_sparse(rng, 7, 9, 0.3);
        const auto x = oracle::random_vector(rng, 9);
        const auto y = spmv(m, oracle::stdvec(x));
        const oracle::Vec ref = oracle::dense(m) * x;
        CHECK((oracle::vec(y) - ref).norm() <= 1e-13 * (1.0 + ref.norm()));
        const auto z = oracle::random_vector(rng, 7);
        const oracle::Vec reft = oracle::dense(m).transpose() * z;
        CHECK((oracle::vec(spmv_transposed(m, oracle::stdvec(z))) - reft).norm() <= 1e-13 * (1.0 + reft.norm()));
    }
}

TEST_CASE("spectral norm on fixed cases") {
    const auto diag = SparseMatrix::from_triplets(2, 2, {{0, 0, -1.0}, {1, 1, -2.0}});
    CHECK_THAT(spectral_norm(diag), WithinRel(2.0, 1e-10));
    const auto jordan = SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}});
    CHECK_THAT(spectral_norm(jordan), WithinRel(1.0, 1e-10));
    CHECK_THAT(spectral_norm(upper_2x2(), {1e-13, 100000}), WithinAbs(oracle::norm2(oracle::dense(upper_2x2())), 1e-8));
}

TEST_CASE("spectral norm matches the dense singular value oracle") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 15; ++trial) {
        const auto m = random_sparse(rng, 6, 10, 0.4);
        const double ref = oracle::norm2(oracle::dense(m));
        CHECK_THAT(spectral_norm(m, {1e-13, 200000}), WithinRel(ref, 1e-6));
    }
}

TEST_CASE("matrix exponential fixed values") {
    const auto z = dense_expm(DenseMatrix(3, 3));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(z(i, j) == (i == j ? 1.0 : 0.0));
    const auto e = dense_expm(DenseMatrix::from_rows({{-1.0}}));
    CHECK_THAT(e(0, 0), WithinRel(std::exp(-1.0), 1e-14));

    const auto a = DenseMatrix::from_rows({{-1.0, 0.2}, {0.0, -2.0}});
    const auto ea = dense_expm(a);
    const oracle::Mat ref = oracle::expm_series(oracle::dense(upper_2x2()));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK_THAT(ea(i, j), WithinAbs(ref(static_cast<long>(i), static_cast<long>(j)), 1e-12));
}

TEST_CASE("matrix exponential agrees with the series oracle on random matrices") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_sparse(rng, 6, 6, 0.5);
        const auto e = dense_expm(DenseMatrix::from_sparse(m));
        const oracle::Mat ref = oracle::expm_series(oracle::dense(m));
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 6; ++j)
                CHECK_THAT(e(i, j), WithinAbs(ref(static_cast<long>(i), static_cast<long>(j)), 1e-11));
    }
}

TEST_CASE("eigenvalues of small matrices") {
    auto sorted_re = [](const std::vector<std::complex<double>>& v) {
        std::vector<double> r;
        for (auto z : v) r.push_back(z.real());
        std::sort(r.begin(), r.end());
        return r;
    };
    const auto d = sorted_re(dense_eigs(DenseMatrix::from_rows({{-1.0, 0.0}, {0.0, -2.0}})));
    CHECK_THAT(d[0], WithinAbs(-2.0, 1e-12));
    CHECK_THAT(d[1], WithinAbs(-1.0, 1e-12));
    const auto t = sorted_re(dense_eigs(DenseMatrix::from_rows({{-1.0, 0.2}, {0.0, -2.0}})));
    CHECK_THAT(t[0], WithinAbs(-2.0, 1e-12));
    CHECK_THAT(t[1], WithinAbs(-1.0, 1e-12));
}

TEST_CASE("condition numbers") {
    CHECK_THAT(dense_condition_number(DenseMatrix::identity(4)), WithinRel(1.0, 1e-14));
    CHECK_THAT(dense_condition_number(DenseMatrix::from_rows({{1.0, 0.0}, {0.0, 4.0}})), WithinRel(4.0, 1e-14));
    CHECK_THROWS_AS(dense_condition_number(DenseMatrix::from_rows({{1.0, 1.0}, {1.0, 1.0}})), Error);
}

TEST_CASE("dense oracles refuse to exceed the entry cap") {
    CHECK_THROWS_AS(DenseMatrix(3000, 3000), Error);
    CHECK_NOTHROW(DenseMatrix(2000, 2000));
    try {
        DenseMatrix m(10, 10, 0.0, 50);
        FAIL("cap not enforced");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CapExceeded);
    }
}

TEST_CASE("triplet text format round-trips") {
    std::mt19937_64 rng(17);
    const auto m = random_sparse(rng, 5, 25, 0.2);
    std::stringstream ss;
    write_triplets(ss, m);
    const auto back = read_triplets(ss);
    CHECK(back == m);

    std::stringstream vs;
    const Vector v{0.1, -2.5e-17, 3.0};
    write_vector(vs, v);
    CHECK(read_vector(vs) == v);
}

TEST_CASE("transpose is an involution and matches the dense transpose") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_sparse(rng, 4, 7, 0.4);
        CHECK(m.transposed().transposed() == m);
        CHECK((oracle::dense(m.transposed()) - oracle::dense(m).transpose()).norm() == 0.0);
    }
}
