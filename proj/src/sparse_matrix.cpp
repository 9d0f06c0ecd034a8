#include "qhpm/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace qhpm {

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
    for (const auto& t : entries) {
        require(t.row < rows && t.col < cols, ErrorKind::Validation,
                "triplet (" + std::to_string(t.row) + "," + std::to_string(t.col) + ") out of bounds for " +
                    std::to_string(rows) + "x" + std::to_string(cols));
        require(std::isfinite(t.value), ErrorKind::Validation, "non-finite matrix entry");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_.assign(rows + 1, 0);
    m.col_idx_.reserve(entries.size());
    m.values_.reserve(entries.size());

    std::size_t i = 0;
    while (i < entries.size()) {
        const std::size_t r = entries[i].row;
        const std::size_t c = entries[i].col;
        double sum = 0.0;
        while (i < entries.size() && entries[i].row == r && entries[i].col == c) {
            sum += entries[i].value;
            ++i;
        }
        if (sum != 0.0) {
            m.col_idx_.push_back(c);
            m.values_.push_back(sum);
            ++m.row_ptr_[r + 1];
        }
    }
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    return m;
}

SparseMatrix SparseMatrix::from_csr(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                                    std::vector<std::size_t> col_idx, std::vector<double> values) {
    require(row_ptr.size() == rows + 1, ErrorKind::Validation, "csr: row_ptr must have rows+1 entries");
    require(row_ptr.front() == 0 && row_ptr.back() == col_idx.size() && col_idx.size() == values.size(),
            ErrorKind::Validation, "csr: inconsistent array lengths");
    for (std::size_t r = 0; r < rows; ++r) {
        require(row_ptr[r] <= row_ptr[r + 1], ErrorKind::Validation, "csr: row_ptr not monotone");
        for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            require(col_idx[k] < cols, ErrorKind::Validation, "csr: column out of bounds");
            require(k == row_ptr[r] || col_idx[k - 1] < col_idx[k], ErrorKind::Validation,
                    "csr: columns not strictly increasing");
        }
    }
    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_ = std::move(row_ptr);
    m.col_idx_ = std::move(col_idx);
    m.values_ = std::move(values);
    return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<std::size_t> ptr(n + 1);
    std::vector<std::size_t> idx(n);
    std::iota(ptr.begin(), ptr.end(), 0);
    std::iota(idx.begin(), idx.end(), 0);
    return from_csr(n, n, std::move(ptr), std::move(idx), std::vector<double>(n, 1.0));
}

SparseMatrix SparseMatrix::zero(std::size_t rows, std::size_t cols) {
    return from_csr(rows, cols, std::vector<std::size_t>(rows + 1, 0), {}, {});
}

SparseMatrix::RowView SparseMatrix::row(std::size_t i) const {
    const std::size_t b = row_ptr_[i];
    const std::size_t e = row_ptr_[i + 1];
    return {std::span<const std::size_t>(col_idx_).subspan(b, e - b),
            std::span<const double>(values_).subspan(b, e - b)};
}

std::vector<std::size_t> SparseMatrix::col_counts() const {
    std::vector<std::size_t> counts(cols_, 0);
    for (std::size_t c : col_idx_) {
        ++counts[c];
    }
    return counts;
}

std::size_t SparseMatrix::max_row_nnz() const {
    std::size_t best = 0;
    for (std::size_t r = 0; r < rows_; ++r) {
        best = std::max(best, row_nnz(r));
    }
    return best;
}

std::size_t SparseMatrix::max_col_nnz() const {
    const auto counts = col_counts();
    return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
}

std::size_t SparseMatrix::sparsity() const { return std::max(max_row_nnz(), max_col_nnz()); }

double SparseMatrix::at(std::size_t i, std::size_t j) const {
    require(i < rows_ && j < cols_, ErrorKind::Validation, "at: index out of bounds");
    const auto r = row(i);
    const auto it = std::lower_bound(r.cols.begin(), r.cols.end(), j);
    if (it == r.cols.end() || *it != j) {
        return 0.0;
    }
    return r.values[static_cast<std::size_t>(it - r.cols.begin())];
}

std::vector<Triplet> SparseMatrix::triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            out.push_back({r, col_idx_[k], values_[k]});
        }
    }
    return out;
}

SparseMatrix SparseMatrix::scaled(double factor) const {
    if (factor == 0.0) {
        return zero(rows_, cols_);
    }
    SparseMatrix out = *this;
    for (double& v : out.values_) {
        v *= factor;
    }
    return out;
}

SparseMatrix SparseMatrix::transposed() const {
    std::vector<Triplet> t = triplets();
    for (auto& e : t) {
        std::swap(e.row, e.col);
    }
    return from_triplets(cols_, rows_, std::move(t));
}

bool SparseMatrix::is_lower_triangular() const {
    for (std::size_t r = 0; r < rows_; ++r) {
        const auto rv = row(r);
        if (!rv.cols.empty() && rv.cols.back() > r) {
            return false;
        }
    }
    return true;
}

void SparseBuilder::add(std::size_t row, std::size_t col, double value) {
    require(row < rows_ && col < cols_, ErrorKind::Validation, "SparseBuilder::add: index out of bounds");
    entries_.push_back({row, col, value});
}

SparseMatrix SparseBuilder::finalize() && { return SparseMatrix::from_triplets(rows_, cols_, std::move(entries_)); }

void spmv_into(const SparseMatrix& m, std::span<const double> x, std::span<double> y) {
    require(x.size() == m.cols() && y.size() == m.rows(), ErrorKind::Validation,
            "spmv: dimension mismatch (matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                ", vector " + std::to_string(x.size()) + ")");
    const auto ptr = m.row_ptr();
    const auto idx = m.col_idx();
    const auto val = m.values();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k) {
            s += val[k] * x[idx[k]];
        }
        y[r] = s;
    }
}

Vector spmv(const SparseMatrix& m, std::span<const double> x) {
    Vector y(m.rows());
    spmv_into(m, x, y);
    return y;
}

Vector spmv_transposed(const SparseMatrix& m, std::span<const double> x) {
    require(x.size() == m.rows(), ErrorKind::Validation, "spmv_transposed: dimension mismatch");
    Vector y(m.cols(), 0.0);
    const auto ptr = m.row_ptr();
    const auto idx = m.col_idx();
    const auto val = m.values();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double xr = x[r];
        if (xr == 0.0) {
            continue;
        }
        for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k) {
            y[idx[k]] += val[k] * xr;
        }
    }
    return y;
}

namespace {

// Generic power iteration for a symmetric positive semidefinite operator.
// Returns the dominant eigenvalue.
template <typename Apply>
double dominant_eigenvalue(std::size_t dim, Apply&& apply, const PowerIterationOptions& opts) {
    if (dim == 0) {
        return 0.0;
    }
    Vector v(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    Vector z = apply(v);
    if (norm2(z) == 0.0) {
        // All-ones lies in the null space; retry from a fixed non-symmetric start.
        for (std::size_t i = 0; i < dim; ++i) {
            v[i] = 1.0 + static_cast<double>((i * 7919U) % 17U) / 17.0;
        }
        v = normalized(v);
        z = apply(v);
        if (norm2(z) == 0.0) {
            return 0.0;
        }
    }

    double lambda = dot(v, z);
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        Vector r = z;
        axpy(-lambda, v, r);
        if (norm2(r) <= opts.tol * std::abs(lambda)) {
            return lambda;
        }
        v = normalized(z);
        z = apply(v);
        const double next = dot(v, z);
        // Stagnation: the Rayleigh quotient has settled even though the vector
        // has not (clustered top eigenvalues).
        if (std::abs(next - lambda) <= 1e-3 * opts.tol * std::abs(next)) {
            return next;
        }
        lambda = next;
    }
    fail(ErrorKind::Numerical, "power iteration did not converge within " + std::to_string(opts.max_iterations) +
                                   " iterations (matrix may be ill-conditioned)");
}

}  // namespace

double spectral_norm(const SparseMatrix& m, PowerIterationOptions opts) {
    if (m.nnz() == 0) {
        return 0.0;
    }
    const double lambda =
        dominant_eigenvalue(m.cols(), [&](const Vector& v) { return spmv_transposed(m, spmv(m, v)); }, opts);
    return std::sqrt(std::max(lambda, 0.0));
}

double symmetric_max_eigenvalue(const SparseMatrix& sym, PowerIterationOptions opts) {
    require(sym.rows() == sym.cols(), ErrorKind::Validation, "symmetric_max_eigenvalue: matrix must be square");
    if (sym.rows() == 0) {
        return 0.0;
    }
    // Gershgorin bound; S + shift*I is positive semidefinite and its top
    // eigenvalue is the top eigenvalue of S shifted.
    double shift = 0.0;
    for (std::size_t r = 0; r < sym.rows(); ++r) {
        double s = 0.0;
        for (double v : sym.row(r).values) {
            s += std::abs(v);
        }
        shift = std::max(shift, s);
    }
    if (shift == 0.0) {
        return 0.0;
    }
    const double top = dominant_eigenvalue(
        sym.rows(),
        [&](const Vector& v) {
            Vector y = spmv(sym, v);
            axpy(shift, v, y);
            return y;
        },
        opts);
    return top - shift;
}

void write_triplets(std::ostream& os, const SparseMatrix& m) {
    os << m.rows() << ' ' << m.cols() << ' ' << m.nnz() << '\n';
    os << std::setprecision(17);
    for (const auto& t : m.triplets()) {
        os << t.row << ' ' << t.col << ' ' << t.value << '\n';
    }
}

SparseMatrix read_triplets(std::istream& is) {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t nnz = 0;
    require(static_cast<bool>(is >> rows >> cols >> nnz), ErrorKind::Io, "triplets: malformed header line");
    std::vector<Triplet> entries;
    entries.reserve(nnz);
    for (std::size_t k = 0; k < nnz; ++k) {
        Triplet t;
        require(static_cast<bool>(is >> t.row >> t.col >> t.value), ErrorKind::Io,
                "triplets: expected " + std::to_string(nnz) + " entries, read " + std::to_string(k));
        entries.push_back(t);
    }
    return SparseMatrix::from_triplets(rows, cols, std::move(entries));
}

SparseMatrix read_triplets_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open matrix file: " + path);
    return read_triplets(in);
}

void write_triplets_file(const std::string& path, const SparseMatrix& m) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot write matrix file: " + path);
    write_triplets(out, m);
}

void write_vector(std::ostream& os, std::span<const double> v) {
    os << std::setprecision(17);
    for (double x : v) {
        os << x << '\n';
    }
}

Vector read_vector(std::istream& is) {
    Vector v;
    double x = 0.0;
    while (is >> x) {
        v.push_back(x);
    }
    require(is.eof(), ErrorKind::Io, "vector: non-numeric token");
    return v;
}

}  // namespace qhpm
