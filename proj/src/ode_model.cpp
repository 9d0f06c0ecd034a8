#include "qhpm/ode_model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "qhpm/rk4.hpp"

namespace qhpm {

std::size_t QuadraticODE::sparsity() const { return std::max(F1.sparsity(), F2.sparsity()); }

QuadraticODE make_ode(SparseMatrix F1, SparseMatrix F2, Vector u_in) {
    const std::size_t n = u_in.size();
    require(n > 0, ErrorKind::Validation, "ODE dimension must be positive");
    require(F1.rows() == n && F1.cols() == n, ErrorKind::Validation,
            "F1 must be " + std::to_string(n) + "x" + std::to_string(n));
    require(F2.rows() == n && F2.cols() == n * n, ErrorKind::Validation,
            "F2 must be " + std::to_string(n) + "x" + std::to_string(n * n));
    for (double v : u_in) {
        require(std::isfinite(v), ErrorKind::Validation, "u_in has a non-finite entry");
    }
    return QuadraticODE{n, std::move(F1), std::move(F2), std::move(u_in)};
}

bool NonlinearityParams::below_postselect_limit() const { return K < std::sqrt(0.5); }

bool NonlinearityParams::covers_initial_norm() const { return K >= norm_u_in * (1.0 - 1e-12); }

bool NonlinearityParams::expm_bound_holds_for(std::size_t c) const {
    return static_cast<double>(c + 1) * norm_F2 <= std::abs(re_lambda1) * (1.0 + 1e-12);
}

std::size_t NonlinearityParams::max_order_for_expm_bound() const {
    if (norm_F2 == 0.0) {
        return std::numeric_limits<std::size_t>::max();
    }
    const double ratio = std::abs(re_lambda1) / norm_F2;
    if (ratio < 1.0) {
        return 0;  // not even c = 0 qualifies; callers test expm_bound_holds_for(0)
    }
    return static_cast<std::size_t>(std::floor(ratio * (1.0 + 1e-12))) - 1;
}

NonlinearityParams compute_K(const QuadraticODE& ode, const ModelOptions& opts) {
    NonlinearityParams p;
    const std::size_t n = ode.n;
    const PowerIterationOptions precise{1e-11, 200'000};
    p.norm_u_in = norm2(ode.u_in);
    p.norm_F2 = ode.F2.nnz() == 0 ? 0.0 : spectral_norm(ode.F2, precise);

    const bool dense_ok = n <= opts.dense_cap / std::max<std::size_t>(n, 1);
    if (dense_ok && !opts.assume_valid) {
        const DenseMatrix f1 = DenseMatrix::from_sparse(ode.F1, opts.dense_cap);
        p.norm_F1 = dense_norm2(f1);
        const DenseMatrix ft = f1.transposed();
        const double comm = dense_norm2(f1 * ft - ft * f1);
        p.normality_defect = p.norm_F1 == 0.0 ? 0.0 : comm / (p.norm_F1 * p.norm_F1);
        p.normality_checked = true;
        require(p.normality_defect <= 1e-10, ErrorKind::Precondition,
                "F1 is not normal (commutator defect " + std::to_string(p.normality_defect) + ")");
        double re = -std::numeric_limits<double>::infinity();
        for (const auto& ev : dense_eigs(f1)) {
            re = std::max(re, ev.real());
        }
        p.re_lambda1 = re;
    } else {
        require(opts.assume_valid, ErrorKind::Precondition,
                "n = " + std::to_string(n) + " exceeds the dense cap; normality of F1 cannot be checked "
                "(set assume_valid to proceed)");
        p.norm_F1 = ode.F1.nnz() == 0 ? 0.0 : spectral_norm(ode.F1, precise);
        // For normal F1 the largest real part of the spectrum is λ_max of its symmetric part.
        std::vector<Triplet> sym;
        for (const auto& t : ode.F1.triplets()) {
            sym.push_back({t.row, t.col, 0.5 * t.value});
            sym.push_back({t.col, t.row, 0.5 * t.value});
        }
        p.re_lambda1 = symmetric_max_eigenvalue(SparseMatrix::from_triplets(n, n, std::move(sym)), precise);
    }
    require(p.re_lambda1 < 0.0, ErrorKind::Precondition,
            "F1 is not dissipative: max Re(lambda) = " + std::to_string(p.re_lambda1));
    p.K = 4.0 * p.norm_u_in * p.norm_F2 / std::abs(p.re_lambda1);
    return p;
}

QuadraticODE rescale(const QuadraticODE& ode, double zeta) {
    require(std::isfinite(zeta) && zeta > 0.0, ErrorKind::Validation, "rescale factor must be positive");
    return QuadraticODE{ode.n, ode.F1, ode.F2.scaled(1.0 / zeta), scaled(ode.u_in, zeta)};
}

double default_zeta(const NonlinearityParams& params) {
    if (params.K > 0.0 && params.norm_u_in > 0.0) {
        return params.K / params.norm_u_in;
    }
    return 1.0;
}

Vector apply_quadratic(const SparseMatrix& F2, std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    require(b.size() == n && F2.cols() == n * n, ErrorKind::Validation, "apply_quadratic: dimension mismatch");
    Vector out(F2.rows(), 0.0);
    for (std::size_t i = 0; i < F2.rows(); ++i) {
        const auto r = F2.row(i);
        double s = 0.0;
        for (std::size_t k = 0; k < r.cols.size(); ++k) {
            const std::size_t q = r.cols[k];
            s += r.values[k] * a[q / n] * b[q % n];
        }
        out[i] = s;
    }
    return out;
}

Vector quadratic_rhs(const QuadraticODE& ode, std::span<const double> u) {
    Vector out = spmv(ode.F1, u);
    if (ode.F2.nnz() > 0) {
        axpy(1.0, apply_quadratic(ode.F2, u, u), out);
    }
    return out;
}

double default_dt(double norm_F1, double T) {
    double dt = T > 0.0 ? T / 1000.0 : std::numeric_limits<double>::infinity();
    if (norm_F1 > 0.0) {
        dt = std::min(dt, 1.0 / (10.0 * norm_F1));
    }
    return std::isfinite(dt) ? dt : 1.0;
}

namespace {

Trajectory integrate(const QuadraticODE& ode, double T, std::size_t steps, bool keep) {
    Trajectory tr;
    tr.dt = steps == 0 ? 0.0 : T / static_cast<double>(steps);
    const double limit = 1e3 * std::max(norm2(ode.u_in), std::numeric_limits<double>::min());
    Vector u = ode.u_in;
    auto rhs = [&](const Vector& y) { return quadratic_rhs(ode, y); };
    if (keep) {
        tr.times.push_back(0.0);
        tr.states.push_back(u);
    }
    for (std::size_t s = 1; s <= steps; ++s) {
        u = rk4_step(rhs, u, tr.dt);
        const double nrm = norm2(u);
        require(std::isfinite(nrm) && nrm <= limit, ErrorKind::Numerical,
                "reference solution diverged at t = " + std::to_string(tr.dt * static_cast<double>(s)));
        if (keep) {
            tr.times.push_back(s == steps ? T : tr.dt * static_cast<double>(s));
            tr.states.push_back(u);
        }
    }
    if (!keep) {
        tr.times.push_back(T);
        tr.states.push_back(std::move(u));
    }
    return tr;
}

}  // namespace

Trajectory reference_solution(const QuadraticODE& ode, double T, double dt) {
    require(std::isfinite(T) && T >= 0.0, ErrorKind::Validation, "T must be finite and non-negative");
    if (dt <= 0.0) {
        double nf1 = 0.0;
        if (ode.F1.nnz() > 0) {
            nf1 = spectral_norm(ode.F1);
        }
        dt = default_dt(nf1, T);
    }
    const std::size_t steps = T == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    Trajectory tr = integrate(ode, T, steps, true);
    if (steps > 0) {
        const Trajectory fine = integrate(ode, T, 2 * steps, false);
        tr.error_estimate = distance(tr.final_state(), fine.final_state()) / 15.0;
    }
    return tr;
}

double bernoulli_closed_form(double a, double u0, double t) {
    // v = 1/u satisfies v' = v − a, so v(t) = a + (1/u0 − a) e^t.
    require(u0 != 0.0, ErrorKind::Validation, "bernoulli_closed_form: u0 must be nonzero");
    return 1.0 / (a + (1.0 / u0 - a) * std::exp(t));
}

}  // namespace qhpm
