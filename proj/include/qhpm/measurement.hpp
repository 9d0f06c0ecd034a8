#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qhpm/dense.hpp"
#include "qhpm/embedding.hpp"
#include "qhpm/taylor_system.hpp"

namespace qhpm {

/// Exact acceptance ratios of the two measurement stages plus the extracted state.
struct MeasurementReport {
    double p1_block = 0.0;  // ‖x_{m,0}‖²/‖x‖²
    double p1_total = 0.0;  // Σ_{j≤p} ‖x_{m,j}‖²/‖x‖², about (p+1)·p1_block
    double p1_bound = 0.0;  // 1/(p+77mg²)
    double chi0_sq = 0.0;   // ‖y_0‖²/‖y‖² on x_{m,p}
    double chi0_bound = 0.0;
    double eta_prime = 0.0;  // K/‖ũ(T)‖
    Vector y_final;          // x_{m,p}
    Vector level0;           // block (0,0) of x_{m,p}
    Vector u_out;            // level0 normalized
};

/// Post-selects the final step blocks and then level 0. norm_u_tilde is ‖ũ(T)‖,
/// which fixes η′ in the level bound. Throws Numerical on a zero final block.
MeasurementReport postselect(const MarchingSolution& sol, const EmbeddingIndexMap& index,
                             const TaylorSystemParams& params, double K, double norm_u_tilde);

/// (1−2K²)/(1−2K²+2η′²); 0 when K ≥ √2/2.
double level_probability_bound(double K, double eta_prime);

/// 1/(p+77mg²).
double step_probability_bound(std::size_t p, std::size_t m, double g);

struct ErrorBudget {
    double final_error = 0.0;     // ‖u_out − u(T)/‖u(T)‖‖
    double epsilon = 0.0;
    double hpm_error = 0.0;       // ‖ũ/‖ũ‖ − u/‖u‖‖
    double hpm_budget = 0.0;      // 2η′ε1/K (= ε/2)
    double solve_error = 0.0;     // ‖u_out − ũ/‖ũ‖‖
    double solve_budget = 0.0;    // ε − hpm_budget
    double amplitude_error = 0.0; // ‖level0 − u(T)‖/‖u(T)‖, unnormalized
    [[nodiscard]] bool pass() const { return final_error <= epsilon; }
};

/// Splits the distance of u_out to the exact normalized state into the
/// truncation part and the linear-solve part. A zero u(T) gives error 0 only
/// when u_out is also zero-length; T = 0 reduces to comparing directions of u_in.
/// amplitude_error compares level0 itself (working units) with u(T) and is
/// left at 0 when level0 is empty.
ErrorBudget final_error(std::span<const double> u_out, std::span<const double> u_tilde, std::span<const double> u_exact,
                        const TaylorSystemParams& params, double K, std::span<const double> level0 = {});

/// Regroups an embedded vector by total order: entry i collects ‖y′_i‖² with
/// y′_0 = level 0 and, for i ≥ 1, every block of level ℓ ≥ 1 with ℓ + Σa = i.
std::vector<double> level_decay_norms_sq(const EmbeddingIndexMap& index, std::span<const double> y);

struct PerturbationBounds {
    double normalized_distance = 0.0;  // 2β/α
    double component_distance = 0.0;  // 2δ/(α−δ)
    double amplitude_floor = 0.0;      // α−δ
};

/// Bounds on normalized vectors and their components under a perturbation.
/// Requires α > 0 and δ < α.
PerturbationBounds normalized_perturbation_bounds(double alpha, double beta, double delta);

/// Σ_{j<m} (βt)^j/j! · e^{−γt}.
double exp_poly_sum(double t, double gamma, double beta, std::size_t m);

struct ScalarCheck {
    bool precondition_ok = false;
    double measured = 0.0;
    double bound = 0.0;
    bool pass = false;
};

/// exp_poly_sum against m; the precondition is γ ≥ β > 0 and t ≥ 0.
ScalarCheck exp_poly_check(double t, double gamma, double beta, std::size_t m);

/// ‖e^{Ml} − T_k(M)^l‖ against 2lΔ(Δ+1)/(k+1)!. The precondition needs ‖M‖ ≤ 1,
/// 2lΔ(Δ+1) ≤ (k+1)! and sup_t ‖e^{Mt}‖ ≤ Δ. That supremum is sampled on
/// t = 0, 1/4, ..., 4·max(l,1) unless the caller already knows it.
ScalarCheck taylor_power_check(const DenseMatrix& M, std::size_t k, std::size_t l, double Delta,
                               std::optional<double> exp_norm_sup = std::nullopt);

/// T_k(M) = Σ_{j≤k} M^j/j!.
DenseMatrix taylor_polynomial(const DenseMatrix& M, std::size_t k);

}  // namespace qhpm
