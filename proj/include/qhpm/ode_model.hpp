#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qhpm/dense.hpp"
#include "qhpm/sparse_matrix.hpp"

namespace qhpm {

/// du/dt = F1 u + F2 (u ⊗ u), u(0) = u_in, with F1 normal and dissipative.
/// F2 is n×n²; column q = a*n + b multiplies u[a]*u[b].
struct QuadraticODE {
    std::size_t n = 0;
    SparseMatrix F1;
    SparseMatrix F2;
    Vector u_in;

    /// Max nonzeros in any row or column of F1 and F2.
    [[nodiscard]] std::size_t sparsity() const;
};

/// Builds and dimension-checks a QuadraticODE.
QuadraticODE make_ode(SparseMatrix F1, SparseMatrix F2, Vector u_in);

struct ModelOptions {
    /// Skip the dense normality/eigenvalue checks (required above the dense cap).
    bool assume_valid = false;
    std::size_t dense_cap = kDefaultDenseCap;
};

struct NonlinearityParams {
    double K = 0.0;
    double re_lambda1 = 0.0;  // max real part over the eigenvalues of F1
    double norm_F1 = 0.0;
    double norm_F2 = 0.0;
    double norm_u_in = 0.0;

    bool normality_checked = false;
    double normality_defect = 0.0;  // ‖F1F1ᵀ − F1ᵀF1‖ / ‖F1‖²

    /// K < √2/2, needed by the post-selection bound.
    [[nodiscard]] bool below_postselect_limit() const;
    /// K ≥ ‖u_in‖, the scaling assumption behind ‖ν_i‖ ≤ K^{i+1}.
    [[nodiscard]] bool covers_initial_norm() const;
    /// (c+1)‖F2‖/|Re λ1| ≤ 1, the precondition of the ‖e^{At}‖ ≤ c+1 bound.
    [[nodiscard]] bool expm_bound_holds_for(std::size_t c) const;
    /// Largest c with (c+1)‖F2‖/|Re λ1| ≤ 1 (a huge value when F2 = 0).
    [[nodiscard]] std::size_t max_order_for_expm_bound() const;
};

/// K = 4‖u_in‖‖F2‖/|Re λ1|. Throws Precondition when F1 is not dissipative or
/// not normal (the latter only checked when n² fits under the dense cap).
NonlinearityParams compute_K(const QuadraticODE& ode, const ModelOptions& opts = {});

/// u → ζu: returns (F1, F2/ζ, ζ u_in). K is invariant.
QuadraticODE rescale(const QuadraticODE& ode, double zeta);

/// ζ = K/‖u_in‖ (1 when either is zero), which makes ‖ζ u_in‖ = K.
double default_zeta(const NonlinearityParams& params);

/// F2 (a ⊗ b) evaluated directly from the sparse entries of F2.
Vector apply_quadratic(const SparseMatrix& F2, std::span<const double> a, std::span<const double> b);

/// Right-hand side F1 u + F2 (u ⊗ u).
Vector quadratic_rhs(const QuadraticODE& ode, std::span<const double> u);

/// Sampled solution on a uniform grid.
struct Trajectory {
    double dt = 0.0;
    std::vector<double> times;
    std::vector<Vector> states;
    /// ‖u_dt(T) − u_{dt/2}(T)‖ / 15 from a step-halved rerun.
    double error_estimate = 0.0;

    [[nodiscard]] const Vector& final_state() const { return states.back(); }
};

/// min(1/(10‖F1‖), T/1000).
double default_dt(double norm_F1, double T);

/// Fixed-step RK4 of the nonlinear system. dt <= 0 selects default_dt. The
/// step is shrunk so that the grid ends exactly at T. Throws Numerical when
/// ‖u‖ exceeds 10³‖u_in‖.
Trajectory reference_solution(const QuadraticODE& ode, double T, double dt = 0.0);

/// Exact solution of du/dt = −u + a u², u(0) = u0.
double bernoulli_closed_form(double a, double u0, double t);

}  // namespace qhpm
