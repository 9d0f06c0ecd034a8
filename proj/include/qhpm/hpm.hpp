#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qhpm/ode_model.hpp"

namespace qhpm {

struct CascadeOptions {
    double dt = 0.0;         // <= 0 selects default_dt
    std::size_t steps = 0;   // > 0 forces exactly this many uniform steps (overrides dt)
    double K = -1.0;         // < 0: computed from the ODE
    bool check_bounds = true;
};

/// Orders ν_0..ν_c of the homotopy cascade sampled on a uniform grid.
struct HpmCascade {
    std::size_t c = 0;
    double dt = 0.0;
    double K = 0.0;
    std::vector<double> times;
    /// nu[t][i] = ν_i(times[t]).
    std::vector<std::vector<Vector>> nu;
    /// d/dt of Σν_i at each grid point (used for Hermite interpolation).
    std::vector<Vector> du;

    [[nodiscard]] std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
    [[nodiscard]] double T() const { return times.back(); }
    /// Σ_{i ≤ order} ν_i at grid index t.
    [[nodiscard]] Vector partial_sum(std::size_t t, std::size_t order) const;
    /// Largest ‖ν_i‖ over the grid.
    [[nodiscard]] double max_norm(std::size_t i) const;
};

/// Integrates dν_i/dt = F1ν_i + F2 Σ_{j<i} ν_j⊗ν_{i−1−j}, ν_0(0) = u_in, ν_i(0) = 0, with
/// RK4 on a single grid. Throws Numerical when some ‖ν_i‖ exceeds 1.1·K^i·max(K, ‖u_in‖).
HpmCascade solve_cascade(const QuadraticODE& ode, std::size_t c, double T, const CascadeOptions& opts = {});

struct SampledState {
    Vector value;
    bool interpolated = false;
};

/// ũ(t) = Σ_{i ≤ c} ν_i(t). Exact on grid points, cubic Hermite in between.
SampledState truncated_solution(const HpmCascade& cascade, double t);

/// α_0..α_c with α_{i+1} = Σ_j α_j α_{i−j}. Throws CapExceeded on 64-bit overflow.
std::vector<std::uint64_t> catalan(std::size_t c);

/// K^{c+2}/(1−K), the tail Σ_{i>c} K^{i+1}. Requires 0 ≤ K < 1.
double truncation_bound(double K, std::size_t c);

/// Smallest c with truncation_bound(K, c) ≤ eps.
std::size_t min_order_for_tolerance(double K, double eps);

}  // namespace qhpm
