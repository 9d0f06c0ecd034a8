#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qhpm/dense.hpp"
#include "qhpm/ode_model.hpp"
#include "qhpm/sparse_matrix.hpp"

namespace qhpm {

inline constexpr std::size_t kDefaultEmbeddingCap = 200'000;

using MultiIndex = std::vector<std::size_t>;

/// Checked binomial coefficient; throws CapExceeded on 64-bit overflow.
std::size_t binomial(std::size_t n, std::size_t k);

/// Level 0 holds the single tuple (0). Level i ≥ 1 holds every (i+1)-tuple of
/// non-negative integers with Σa ≤ c−i, ordered by Σa and then lexicographically.
std::vector<MultiIndex> enumerate_level(std::size_t c, std::size_t i);

/// Bijection between (level i, position j) and the multi-index ā_{i,j}, plus
/// the layout of the length-N embedded vector.
class EmbeddingIndexMap {
public:
    EmbeddingIndexMap(std::size_t n, std::size_t c, std::size_t N_cap = kDefaultEmbeddingCap);

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] std::size_t c() const noexcept { return c_; }
    [[nodiscard]] std::size_t N() const noexcept { return N_; }
    [[nodiscard]] std::size_t beta(std::size_t i) const { return beta_.at(i); }
    [[nodiscard]] const std::vector<std::size_t>& betas() const noexcept { return beta_; }
    /// n^{i+1}, the length of every block at level i.
    [[nodiscard]] std::size_t block_size(std::size_t i) const { return block_size_.at(i); }
    /// Start of level i inside the embedded vector.
    [[nodiscard]] std::size_t level_offset(std::size_t i) const { return level_offset_.at(i); }
    /// Start of block (i, j).
    [[nodiscard]] std::size_t offset(std::size_t i, std::size_t j) const;

    [[nodiscard]] std::size_t rank(std::size_t i, std::span<const std::size_t> a) const;
    [[nodiscard]] MultiIndex unrank(std::size_t i, std::size_t j) const;

    [[nodiscard]] std::span<const double> block(std::span<const double> y, std::size_t i, std::size_t j) const;

private:
    std::size_t n_;
    std::size_t c_;
    std::size_t N_ = 0;
    std::vector<std::size_t> beta_;
    std::vector<std::size_t> block_size_;
    std::vector<std::size_t> level_offset_;
};

/// (n+1)^{c+1} − 1 − cn, checked against overflow.
std::size_t embedding_dimension(std::size_t n, std::size_t c);

struct EmbeddedSystem {
    EmbeddingIndexMap index;
    SparseMatrix A;
    Vector y_in;
    double norm_A = 0.0;
};

/// Block upper-bidiagonal generator A of the linear embedding. Throws
/// CapExceeded when N exceeds N_cap.
SparseMatrix assemble_A(const QuadraticODE& ode, const EmbeddingIndexMap& index);

/// Block (i, 0) holds u_in^{⊗(i+1)}; everything else is zero.
Vector assemble_y_in(const QuadraticODE& ode, const EmbeddingIndexMap& index);

/// Index map, A, y_in and ‖A‖ in one go.
EmbeddedSystem embed(const QuadraticODE& ode, std::size_t c, std::size_t N_cap = kDefaultEmbeddingCap);

/// y built from cascade orders ν_0..ν_c: level 0 is Σν_l, block (i, j) is ⊗_k ν_{a_k}.
Vector embedded_state(const EmbeddingIndexMap& index, std::span<const Vector> nu);

/// ‖embedded_state(index, nu)‖ computed from the factor norms without materializing y.
double embedded_norm(const EmbeddingIndexMap& index, std::span<const Vector> nu);

struct StructuralReport {
    std::size_t s = 0;
    std::size_t max_row_nnz = 0;
    std::size_t max_col_nnz = 0;
    std::size_t sparsity_witness = 0;  // s·(c+1)²
    bool sparsity_ok = false;

    double norm_A = 0.0;
    double norm_bound = 0.0;  // (c+1)(‖F1‖+‖F2‖)
    bool norm_ok = false;

    bool eigenvalues_checked = false;
    double max_real_eigenvalue = 0.0;
    bool eigenvalues_ok = false;

    [[nodiscard]] bool ok() const { return sparsity_ok && norm_ok && (!eigenvalues_checked || eigenvalues_ok); }
};

/// Measures the sparsity, norm and spectrum of A against their proven bounds.
/// The spectrum is only checked when N² fits under dense_cap. Throws
/// BoundViolation on any violated bound when throw_on_violation is set.
StructuralReport structural_report(const QuadraticODE& ode, const EmbeddedSystem& sys,
                                   std::size_t dense_cap = kDefaultDenseCap, bool throw_on_violation = true);

/// Flat column indices of the nonzeros in row `digits` of
/// B(m) = Σ_j I^{⊗j} ⊗ F1 ⊗ I^{⊗(m−j)}, where digits has m+1 entries, most
/// significant first. The diagonal is always included.
std::vector<std::size_t> row_pattern_Bm(const SparseMatrix& F1, std::size_t m, std::span<const std::size_t> digits);

}  // namespace qhpm
