#include "qhpm/dense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace qhpm {

namespace {

using EigenRowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenRowMatrix> view(const DenseMatrix& m) {
    return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

DenseMatrix from_eigen(const Eigen::MatrixXd& e) {
    DenseMatrix out(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
        for (Eigen::Index j = 0; j < e.cols(); ++j) {
            out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = e(i, j);
        }
    }
    return out;
}

void check_cap(std::size_t rows, std::size_t cols, std::size_t cap) {
    require(rows == 0 || cols <= cap / rows, ErrorKind::CapExceeded,
            "dense oracle cap exceeded: " + std::to_string(rows) + "x" + std::to_string(cols) + " > " +
                std::to_string(cap) + " entries");
}

void require_square(const DenseMatrix& m, const char* what) {
    require(m.rows() == m.cols(), ErrorKind::Validation, std::string(what) + ": matrix must be square");
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill, std::size_t cap)
    : rows_(rows), cols_(cols) {
    check_cap(rows, cols, cap);
    data_.assign(rows * cols, fill);
}

DenseMatrix DenseMatrix::identity(std::size_t n, std::size_t cap) {
    DenseMatrix m(n, n, 0.0, cap);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

DenseMatrix DenseMatrix::from_sparse(const SparseMatrix& s, std::size_t cap) {
    DenseMatrix m(s.rows(), s.cols(), 0.0, cap);
    for (const auto& t : s.triplets()) {
        m(t.row, t.col) = t.value;
    }
    return m;
}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    DenseMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        require(rows[i].size() == c, ErrorKind::Validation, "from_rows: ragged input");
        for (std::size_t j = 0; j < c; ++j) {
            m(i, j) = rows[i][j];
        }
    }
    return m;
}

Vector DenseMatrix::apply(std::span<const double> x) const {
    require(x.size() == cols_, ErrorKind::Validation, "DenseMatrix::apply: dimension mismatch");
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) {
            s += data_[i * cols_ + j] * x[j];
        }
        y[i] = s;
    }
    return y;
}

DenseMatrix DenseMatrix::scaled(double factor) const {
    DenseMatrix out = *this;
    for (double& v : out.data_) {
        v *= factor;
    }
    return out;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            out(j, i) = (*this)(i, j);
        }
    }
    return out;
}

double DenseMatrix::frobenius_norm() const { return norm2(data_); }

double DenseMatrix::max_abs() const {
    double best = 0.0;
    for (double v : data_) {
        best = std::max(best, std::abs(v));
    }
    return best;
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), ErrorKind::Validation, "dense multiply: dimension mismatch");
    const EigenRowMatrix prod = view(a) * view(b);
    return from_eigen(prod);
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Validation, "dense add: dimension mismatch");
    DenseMatrix out = a;
    for (std::size_t k = 0; k < out.data_.size(); ++k) {
        out.data_[k] += b.data_[k];
    }
    return out;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Validation,
            "dense subtract: dimension mismatch");
    DenseMatrix out = a;
    for (std::size_t k = 0; k < out.data_.size(); ++k) {
        out.data_[k] -= b.data_[k];
    }
    return out;
}

DenseMatrix dense_expm(const DenseMatrix& m) {
    require_square(m, "dense_expm");
    if (m.rows() == 0) {
        return m;
    }
    const Eigen::MatrixXd a = view(m);
    const Eigen::MatrixXd e = a.exp();
    require(e.allFinite(), ErrorKind::Numerical, "dense_expm: non-finite result");
    return from_eigen(e);
}

std::vector<std::complex<double>> dense_eigs(const DenseMatrix& m) {
    require_square(m, "dense_eigs");
    if (m.rows() == 0) {
        return {};
    }
    const Eigen::MatrixXd a = view(m);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/true);
    require(solver.info() == Eigen::Success, ErrorKind::Numerical, "dense_eigs: eigenvalue iteration did not converge");

    const Eigen::VectorXcd values = solver.eigenvalues();
    const Eigen::MatrixXcd vectors = solver.eigenvectors();
    const Eigen::MatrixXcd ac = a.cast<std::complex<double>>();
    const double scale = std::max(1.0, a.lpNorm<Eigen::Infinity>());

    std::vector<std::complex<double>> out(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const Eigen::VectorXcd v = vectors.col(i);
        const double residual = (ac * v - values(i) * v).norm();
        require(residual <= 1e-8 * scale * v.norm(), ErrorKind::Numerical,
                "dense_eigs: eigenpair residual " + std::to_string(residual) + " exceeds tolerance");
        out[static_cast<std::size_t>(i)] = values(i);
    }
    return out;
}

Vector dense_singular_values(const DenseMatrix& m) {
    if (m.size() == 0) {
        return {};
    }
    const Eigen::MatrixXd a = view(m);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    const Eigen::VectorXd s = svd.singularValues();
    Vector out(s.data(), s.data() + s.size());
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

double dense_norm2(const DenseMatrix& m) {
    const Vector s = dense_singular_values(m);
    return s.empty() ? 0.0 : s.front();
}

double dense_condition_number(const DenseMatrix& m) {
    require_square(m, "dense_condition_number");
    const Vector s = dense_singular_values(m);
    require(!s.empty(), ErrorKind::Validation, "dense_condition_number: empty matrix");
    const double smax = s.front();
    const double smin = s.back();
    require(smin > smax * static_cast<double>(m.rows()) * std::numeric_limits<double>::epsilon(),
            ErrorKind::Numerical, "dense_condition_number: matrix is singular");
    return smax / smin;
}

}  // namespace qhpm
