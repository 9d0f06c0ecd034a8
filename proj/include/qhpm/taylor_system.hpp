#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qhpm/dense.hpp"
#include "qhpm/embedding.hpp"
#include "qhpm/ode_model.hpp"
#include "qhpm/sparse_matrix.hpp"

namespace qhpm {

/// Time-marching parameters. d = m(k+1)+p; the system has d+1 blocks of size N.
struct TaylorSystemParams {
    std::size_t c = 0;
    std::size_t m = 1;
    std::size_t k = 1;
    std::size_t p = 1;
    double T = 0.0;
    double h = 0.0;
    double delta = 0.0;
    double epsilon = 0.0;
    double epsilon1 = 0.0;
    double Omega = 0.0;
    double g = 1.0;
    double eta = 1.0;
    double eta_prime = 0.0;
    /// Preconditions that failed but were overridden by `force`.
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t d() const { return m * (k + 1) + p; }
    [[nodiscard]] std::size_t blocks() const { return d() + 1; }
};

/// HPM order choice for tolerance ε: the larger of ⌈log_{1/K}(4‖u_in‖/((1−K)εη))⌉
/// and the smallest c whose truncation bound fits ε1 = ε‖u_in‖/(4η). 0 when K = 0.
struct OrderChoice {
    std::size_t c = 0;
    std::size_t c_formula = 0;
    std::size_t c_scan = 0;
    double epsilon1 = 0.0;
};
OrderChoice select_order(const NonlinearityParams& np, double epsilon, double eta);

/// m = p = max(1, ⌈T‖A‖⌉), h = T/m (so ‖Ah‖ ≤ 1).
struct MarchingGrid {
    std::size_t m = 1;
    std::size_t p = 1;
    double h = 0.0;
};
MarchingGrid marching_grid(double T, double norm_A);

/// ⌊2 ln Ω / ln ln Ω⌋ raised until (k+1)! ≥ Ω, compared exactly.
std::size_t taylor_order_for(double Omega);

/// (k+1)! ≥ x, evaluated with exact integer arithmetic.
bool factorial_at_least(std::size_t k_plus_1, double x);

struct SelectionOptions {
    std::optional<std::size_t> k, m, p;
    std::optional<double> h;
    bool force = false;
};

/// Completes the parameter set for an embedded system of order sys.index.c():
/// grid, δ = ε·min(1, √(1−2K²)/η′)/(30√(78m)·g), Ω = 50m(c+1)(c+2)g/δ and k.
/// Throws Precondition for K ≥ √2/2, ε above 0.1√(1−2K²)/η′, or
/// (c+1)‖F2‖/|Re λ1| > 1, unless opts.force is set (then they become warnings).
TaylorSystemParams select_parameters(const NonlinearityParams& np, const EmbeddedSystem& sys, double T,
                                     double epsilon, double g, double eta, const SelectionOptions& opts = {});

/// The (d+1)N × (d+1)N marching matrix, assembled row by row in CSR form.
SparseMatrix assemble_C(const SparseMatrix& A, const TaylorSystemParams& params);

/// e_0 ⊗ y_in.
Vector marching_rhs(std::span<const double> y_in, const TaylorSystemParams& params);

enum class SolverKind { Forward, Iterative };
SolverKind parse_solver(const std::string& name);
const char* to_string(SolverKind kind);

struct MarchingSolution {
    std::size_t N = 0;
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t p = 0;
    Vector x;
    double relative_residual = 0.0;
    SolverKind solver = SolverKind::Forward;
    bool used_fallback = false;

    /// x_{i,j}: for i < m the Taylor term j ≤ k of step i; for i = m the copy j ≤ p.
    [[nodiscard]] std::span<const double> block(std::size_t i, std::size_t j) const;
    [[nodiscard]] std::span<const double> final_block() const { return block(m, p); }
};

/// Solves C x = e_0 ⊗ y_in to relative residual ≤ min(δ, 1e-10), or ≤ tol when
/// tol > 0. Forward substitution is exact for the unit lower-triangular C; when
/// it misses the target (or Iterative is requested) restarted GMRES takes over.
MarchingSolution solve_marching(const SparseMatrix& C, std::span<const double> y_in, const TaylorSystemParams& params,
                                SolverKind solver = SolverKind::Forward, double tol = 0.0);

struct ConditionReport {
    bool measured = false;
    double kappa = 0.0;
    double bound = 0.0;  // 2e√k(m(k+1)+p)(c+2)
    [[nodiscard]] bool pass() const { return !measured || kappa <= bound; }
};

/// 2e√k(m(k+1)+p)(c+2).
double condition_bound(std::size_t m, std::size_t k, std::size_t p, std::size_t c);

/// Dense-SVD κ(C) when its size fits the dense cap, always with the bound.
ConditionReport condition_report(const SparseMatrix& C, const TaylorSystemParams& params,
                                 std::size_t dense_cap = kDefaultDenseCap);

/// 2j(c+1)(c+2)‖y_in‖/(k+1)!, the error of x_{j,0} against e^{Ajh} y_in.
double marching_error_bound(std::size_t j, std::size_t c, std::size_t k, double norm_y_in);

}  // namespace qhpm
