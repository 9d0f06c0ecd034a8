#pragma once

#include <cstddef>

#include "qhpm/vector_ops.hpp"

namespace qhpm {

/// One classical fourth-order Runge-Kutta step of dy/dt = rhs(y) (autonomous).
template <typename Rhs>
Vector rk4_step(Rhs&& rhs, const Vector& y, double dt) {
    const std::size_t n = y.size();
    const Vector k1 = rhs(y);
    Vector tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
    const Vector k2 = rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
    const Vector k3 = rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * k3[i];
    const Vector k4 = rhs(tmp);
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return out;
}

}  // namespace qhpm
