#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qhpm/vector_ops.hpp"

namespace qhpm {

struct Triplet {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

/// Real row-compressed sparse matrix. Immutable once built; column indices
/// inside a row are strictly increasing and no stored value is exactly zero.
class SparseMatrix {
public:
    struct RowView {
        std::span<const std::size_t> cols;
        std::span<const double> values;
    };

    SparseMatrix() = default;

    /// Sorts, sums duplicate (row, col) pairs and drops entries that sum to zero.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);

    /// Adopts CSR arrays; validates bounds and strictly increasing columns per row.
    static SparseMatrix from_csr(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                                 std::vector<std::size_t> col_idx, std::vector<double> values);

    static SparseMatrix identity(std::size_t n);
    static SparseMatrix zero(std::size_t rows, std::size_t cols);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t nnz() const noexcept { return values_.size(); }

    [[nodiscard]] RowView row(std::size_t i) const;
    [[nodiscard]] std::size_t row_nnz(std::size_t i) const { return row_ptr_[i + 1] - row_ptr_[i]; }
    [[nodiscard]] std::vector<std::size_t> col_counts() const;
    [[nodiscard]] std::size_t max_row_nnz() const;
    [[nodiscard]] std::size_t max_col_nnz() const;
    /// max(max_row_nnz, max_col_nnz): the "s" of the sparse-access model.
    [[nodiscard]] std::size_t sparsity() const;

    /// Entry lookup (zero when not stored).
    [[nodiscard]] double at(std::size_t i, std::size_t j) const;

    [[nodiscard]] std::vector<Triplet> triplets() const;
    [[nodiscard]] SparseMatrix scaled(double factor) const;
    [[nodiscard]] SparseMatrix transposed() const;
    [[nodiscard]] bool is_lower_triangular() const;

    [[nodiscard]] std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
    [[nodiscard]] std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

/// Incremental coordinate-format assembly.
class SparseBuilder {
public:
    SparseBuilder(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

    void add(std::size_t row, std::size_t col, double value);
    void reserve(std::size_t n) { entries_.reserve(n); }
    [[nodiscard]] SparseMatrix finalize() &&;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<Triplet> entries_;
};

Vector spmv(const SparseMatrix& m, std::span<const double> x);
void spmv_into(const SparseMatrix& m, std::span<const double> x, std::span<double> y);
Vector spmv_transposed(const SparseMatrix& m, std::span<const double> x);

struct PowerIterationOptions {
    double tol = 1e-8;
    std::size_t max_iterations = 10'000;
};

/// ‖M‖₂ by power iteration on MᵀM from the normalized all-ones vector.
/// Throws ErrorKind::Numerical when the iteration cap is hit.
double spectral_norm(const SparseMatrix& m, PowerIterationOptions opts = {});

/// Largest eigenvalue of a symmetric matrix (shifted power iteration).
double symmetric_max_eigenvalue(const SparseMatrix& sym, PowerIterationOptions opts = {});

// Triplet text format: "rows cols nnz" then nnz lines "i j value", 0-based.
void write_triplets(std::ostream& os, const SparseMatrix& m);
SparseMatrix read_triplets(std::istream& is);
SparseMatrix read_triplets_file(const std::string& path);
void write_triplets_file(const std::string& path, const SparseMatrix& m);

// One value per line.
void write_vector(std::ostream& os, std::span<const double> v);
Vector read_vector(std::istream& is);

}  // namespace qhpm
