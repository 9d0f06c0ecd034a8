#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "qhpm/error.hpp"

namespace qhpm {

using Vector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::Validation, "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

/// Euclidean norm, scaled to avoid overflow/underflow for extreme entries.
inline double norm2(std::span<const double> a) {
    double scale = 0.0;
    for (double v : a) {
        scale = std::max(scale, std::abs(v));
    }
    if (scale == 0.0 || !std::isfinite(scale)) {
        return scale;
    }
    double s = 0.0;
    for (double v : a) {
        const double r = v / scale;
        s += r * r;
    }
    return scale * std::sqrt(s);
}

inline double norm2_squared(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) {
        s += v * v;
    }
    return s;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size(), ErrorKind::Validation, "axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::Validation, "subtract: length mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    return norm2(subtract(a, b));
}

inline Vector scaled(std::span<const double> a, double s) {
    Vector out(a.begin(), a.end());
    for (double& v : out) {
        v *= s;
    }
    return out;
}

/// a ⊗ b with the first factor most significant: out[i*|b| + j] = a[i] * b[j].
inline Vector kron(std::span<const double> a, std::span<const double> b) {
    Vector out(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            out[i * b.size() + j] = a[i] * b[j];
        }
    }
    return out;
}

/// Returns v / ‖v‖; throws on a zero vector.
inline Vector normalized(std::span<const double> v) {
    const double nrm = norm2(v);
    require(nrm > 0.0, ErrorKind::Numerical, "cannot normalize a zero vector");
    return scaled(v, 1.0 / nrm);
}

}  // namespace qhpm
