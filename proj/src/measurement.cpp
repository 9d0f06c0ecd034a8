#include "qhpm/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qhpm {

double level_probability_bound(double K, double eta_prime) {
    const double a = 1.0 - 2.0 * K * K;
    if (a <= 0.0) {
        return 0.0;
    }
    return a / (a + 2.0 * eta_prime * eta_prime);
}

double step_probability_bound(std::size_t p, std::size_t m, double g) {
    return 1.0 / (static_cast<double>(p) + 77.0 * static_cast<double>(m) * g * g);
}

MeasurementReport postselect(const MarchingSolution& sol, const EmbeddingIndexMap& index,
                             const TaylorSystemParams& params, double K, double norm_u_tilde) {
    require(sol.N == index.N(), ErrorKind::Validation, "postselect: solution and index map disagree on N");
    MeasurementReport rep;
    const double total = norm2_squared(sol.x);
    require(total > 0.0, ErrorKind::Numerical, "postselect: marching solution is zero");

    double final_sq = 0.0;
    for (std::size_t j = 0; j <= sol.p; ++j) {
        final_sq += norm2_squared(sol.block(sol.m, j));
    }
    rep.p1_block = norm2_squared(sol.block(sol.m, 0)) / total;
    rep.p1_total = final_sq / total;
    rep.p1_bound = step_probability_bound(params.p, params.m, params.g);

    const auto y = sol.final_block();
    rep.y_final.assign(y.begin(), y.end());
    const double y_sq = norm2_squared(y);
    require(y_sq > 0.0, ErrorKind::Numerical, "postselect: final step block is zero");
    const auto lvl0 = index.block(y, 0, 0);
    rep.level0.assign(lvl0.begin(), lvl0.end());
    rep.chi0_sq = norm2_squared(lvl0) / y_sq;
    rep.eta_prime = norm_u_tilde > 0.0 ? K / norm_u_tilde : 0.0;
    rep.chi0_bound = level_probability_bound(K, rep.eta_prime);
    rep.u_out = normalized(rep.level0);
    return rep;
}

ErrorBudget final_error(std::span<const double> u_out, std::span<const double> u_tilde, std::span<const double> u_exact,
                        const TaylorSystemParams& params, double K, std::span<const double> level0) {
    ErrorBudget b;
    b.epsilon = params.epsilon;
    const Vector exact_dir = normalized(u_exact);
    const Vector tilde_dir = normalized(u_tilde);
    const Vector out_dir = normalized(u_out);
    b.final_error = distance(out_dir, exact_dir);
    b.hpm_error = distance(tilde_dir, exact_dir);
    b.solve_error = distance(out_dir, tilde_dir);
    b.hpm_budget = K > 0.0 ? 2.0 * params.eta_prime * params.epsilon1 / K : 0.5 * params.epsilon;
    b.solve_budget = params.epsilon - b.hpm_budget;
    if (!level0.empty()) {
        require(level0.size() == u_exact.size(), ErrorKind::Validation, "final_error: level0 length mismatch");
        const double scale = norm2(u_exact);
        const double diff = distance(level0, u_exact);
        b.amplitude_error = scale > 0.0 ? diff / scale : diff;
    }
    return b;
}

std::vector<double> level_decay_norms_sq(const EmbeddingIndexMap& index, std::span<const double> y) {
    require(y.size() == index.N(), ErrorKind::Validation, "level_decay_norms_sq: vector length must equal N");
    std::vector<double> groups(index.c() + 1, 0.0);
    groups[0] = norm2_squared(index.block(y, 0, 0));
    for (std::size_t l = 1; l <= index.c(); ++l) {
        for (std::size_t j = 0; j < index.beta(l); ++j) {
            const MultiIndex a = index.unrank(l, j);
            const std::size_t order = l + std::accumulate(a.begin(), a.end(), std::size_t{0});
            groups[order] += norm2_squared(index.block(y, l, j));
        }
    }
    return groups;
}

PerturbationBounds normalized_perturbation_bounds(double alpha, double beta, double delta) {
    require(alpha > 0.0, ErrorKind::Validation, "perturbation bounds need alpha > 0");
    require(beta >= 0.0 && delta >= 0.0, ErrorKind::Validation, "perturbation sizes must be non-negative");
    require(delta < alpha, ErrorKind::Precondition, "perturbation bounds need delta < alpha");
    return {2.0 * beta / alpha, 2.0 * delta / (alpha - delta), alpha - delta};
}

double exp_poly_sum(double t, double gamma, double beta, std::size_t m) {
    double term = 1.0;
    double sum = 0.0;
    const double x = beta * t;
    for (std::size_t j = 0; j < m; ++j) {
        if (j > 0) {
            term *= x / static_cast<double>(j);
        }
        sum += term;
    }
    return sum * std::exp(-gamma * t);
}

ScalarCheck exp_poly_check(double t, double gamma, double beta, std::size_t m) {
    ScalarCheck out;
    out.precondition_ok = t >= 0.0 && beta > 0.0 && gamma >= beta && m >= 1;
    out.measured = exp_poly_sum(t, gamma, beta, m);
    out.bound = static_cast<double>(m);
    out.pass = out.measured <= out.bound;
    return out;
}

DenseMatrix taylor_polynomial(const DenseMatrix& M, std::size_t k) {
    require(M.rows() == M.cols(), ErrorKind::Validation, "taylor_polynomial: matrix must be square");
    DenseMatrix sum = DenseMatrix::identity(M.rows());
    DenseMatrix term = sum;
    for (std::size_t j = 1; j <= k; ++j) {
        term = (term * M).scaled(1.0 / static_cast<double>(j));
        sum = sum + term;
    }
    return sum;
}

ScalarCheck taylor_power_check(const DenseMatrix& M, std::size_t k, std::size_t l, double Delta,
                               std::optional<double> exp_norm_sup) {
    ScalarCheck out;
    const double fact = std::tgamma(static_cast<double>(k) + 2.0);
    const double dl = static_cast<double>(l);
    out.bound = 2.0 * dl * Delta * (Delta + 1.0) / fact;

    bool pre = dense_norm2(M) <= 1.0 + 1e-12 && 2.0 * dl * Delta * (Delta + 1.0) <= fact;
    if (pre && !exp_norm_sup) {
        const std::size_t samples = 16 * std::max<std::size_t>(l, 1);
        const DenseMatrix step = dense_expm(M.scaled(0.25));
        DenseMatrix P = DenseMatrix::identity(M.rows());
        double sup = 1.0;
        for (std::size_t s = 1; s <= samples; ++s) {
            P = P * step;
            sup = std::max(sup, dense_norm2(P));
        }
        exp_norm_sup = sup;
    }
    if (exp_norm_sup) {
        pre = pre && *exp_norm_sup <= Delta * (1.0 + 1e-12);
    }
    out.precondition_ok = pre;

    const DenseMatrix Tk = taylor_polynomial(M, k);
    DenseMatrix power = DenseMatrix::identity(M.rows());
    for (std::size_t j = 0; j < l; ++j) {
        power = power * Tk;
    }
    out.measured = dense_norm2(dense_expm(M.scaled(dl)) - power);
    out.pass = out.measured <= out.bound;
    return out;
}

}  // namespace qhpm
