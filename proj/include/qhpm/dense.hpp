#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "qhpm/sparse_matrix.hpp"

namespace qhpm {

inline constexpr std::size_t kDefaultDenseCap = 4'000'000;

/// Small row-major dense matrix. Only used by verification oracles; every
/// construction is checked against an entry cap so large embeddings are never
/// densified by accident.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0, std::size_t cap = kDefaultDenseCap);

    static DenseMatrix identity(std::size_t n, std::size_t cap = kDefaultDenseCap);
    static DenseMatrix from_sparse(const SparseMatrix& m, std::size_t cap = kDefaultDenseCap);
    static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    [[nodiscard]] Vector apply(std::span<const double> x) const;
    [[nodiscard]] DenseMatrix scaled(double factor) const;
    [[nodiscard]] DenseMatrix transposed() const;
    [[nodiscard]] double frobenius_norm() const;
    [[nodiscard]] double max_abs() const;

    friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
    friend DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
    friend DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Matrix exponential by Padé scaling and squaring.
DenseMatrix dense_expm(const DenseMatrix& m);

/// All eigenvalues; each returned value is verified against its eigenvector by
/// the residual ‖Mv − γv‖ ≤ 1e-8·max(1,‖M‖)·‖v‖ (throws Numerical otherwise).
std::vector<std::complex<double>> dense_eigs(const DenseMatrix& m);

/// Singular values in descending order.
Vector dense_singular_values(const DenseMatrix& m);

/// ‖M‖₂ (largest singular value).
double dense_norm2(const DenseMatrix& m);

/// σ_max/σ_min; throws Numerical when M is (numerically) singular.
double dense_condition_number(const DenseMatrix& m);

}  // namespace qhpm
