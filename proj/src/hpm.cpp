#include "qhpm/hpm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qhpm/rk4.hpp"

namespace qhpm {

namespace {

// State layout: order i occupies [i*n, (i+1)*n).
Vector cascade_rhs(const QuadraticODE& ode, std::size_t c, const Vector& y) {
    const std::size_t n = ode.n;
    Vector out((c + 1) * n, 0.0);
    auto order = [&](std::size_t i) { return std::span<const double>(y).subspan(i * n, n); };
    for (std::size_t i = 0; i <= c; ++i) {
        std::span<double> dst(out.data() + i * n, n);
        spmv_into(ode.F1, order(i), dst);
        if (i == 0 || ode.F2.nnz() == 0) {
            continue;
        }
        for (std::size_t j = 0; j < i; ++j) {
            const Vector f = apply_quadratic(ode.F2, order(j), order(i - 1 - j));
            axpy(1.0, f, dst);
        }
    }
    return out;
}

std::vector<Vector> split(const Vector& y, std::size_t c, std::size_t n) {
    std::vector<Vector> parts(c + 1);
    for (std::size_t i = 0; i <= c; ++i) {
        parts[i].assign(y.begin() + static_cast<std::ptrdiff_t>(i * n),
                        y.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    }
    return parts;
}

Vector summed(const Vector& y, std::size_t c, std::size_t n) {
    Vector s(n, 0.0);
    for (std::size_t i = 0; i <= c; ++i) {
        for (std::size_t a = 0; a < n; ++a) {
            s[a] += y[i * n + a];
        }
    }
    return s;
}

}  // namespace

Vector HpmCascade::partial_sum(std::size_t t, std::size_t order) const {
    require(t < nu.size(), ErrorKind::Validation, "partial_sum: grid index out of range");
    require(order <= c, ErrorKind::Validation, "partial_sum: order exceeds cascade order");
    Vector s(nu[t][0].size(), 0.0);
    for (std::size_t i = 0; i <= order; ++i) {
        axpy(1.0, nu[t][i], s);
    }
    return s;
}

double HpmCascade::max_norm(std::size_t i) const {
    double best = 0.0;
    for (const auto& row : nu) {
        best = std::max(best, norm2(row.at(i)));
    }
    return best;
}

HpmCascade solve_cascade(const QuadraticODE& ode, std::size_t c, double T, const CascadeOptions& opts) {
    require(std::isfinite(T) && T >= 0.0, ErrorKind::Validation, "T must be finite and non-negative");
    const std::size_t n = ode.n;

    HpmCascade out;
    out.c = c;
    out.K = opts.K >= 0.0 ? opts.K : compute_K(ode).K;

    std::size_t steps = opts.steps;
    if (steps == 0 && T > 0.0) {
        const double dt = opts.dt > 0.0 ? opts.dt : default_dt(ode.F1.nnz() ? spectral_norm(ode.F1) : 0.0, T);
        steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    }
    if (T == 0.0) {
        steps = 0;
    }
    out.dt = steps == 0 ? 0.0 : T / static_cast<double>(steps);

    const double base = std::max(out.K, norm2(ode.u_in));
    std::vector<double> limits(c + 1);
    for (std::size_t i = 0; i <= c; ++i) {
        limits[i] = 1.1 * std::pow(out.K, static_cast<double>(i)) * base + 1e-12;
    }

    Vector y((c + 1) * n, 0.0);
    std::copy(ode.u_in.begin(), ode.u_in.end(), y.begin());
    auto rhs = [&](const Vector& v) { return cascade_rhs(ode, c, v); };

    auto record = [&](double t, const Vector& state) {
        auto parts = split(state, c, n);
        if (opts.check_bounds) {
            for (std::size_t i = 0; i <= c; ++i) {
                const double nrm = norm2(parts[i]);
                require(std::isfinite(nrm) && nrm <= limits[i], ErrorKind::Numerical,
                        "cascade order " + std::to_string(i) + " diverged at t = " + std::to_string(t) +
                            " (norm " + std::to_string(nrm) + ", limit " + std::to_string(limits[i]) + ")");
            }
        }
        out.times.push_back(t);
        out.nu.push_back(std::move(parts));
        out.du.push_back(summed(rhs(state), c, n));
    };

    record(0.0, y);
    for (std::size_t s = 1; s <= steps; ++s) {
        y = rk4_step(rhs, y, out.dt);
        record(s == steps ? T : out.dt * static_cast<double>(s), y);
    }
    return out;
}

SampledState truncated_solution(const HpmCascade& cascade, double t) {
    const double T = cascade.T();
    require(t >= 0.0 && t <= T * (1.0 + 1e-12), ErrorKind::Validation,
            "truncated_solution: t outside [0, " + std::to_string(T) + "]");
    const std::size_t steps = cascade.steps();
    if (steps == 0) {
        return {cascade.partial_sum(0, cascade.c), false};
    }
    const double pos = std::min(t / cascade.dt, static_cast<double>(steps));
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) <= 1e-9) {
        return {cascade.partial_sum(static_cast<std::size_t>(nearest), cascade.c), false};
    }
    const auto k = static_cast<std::size_t>(std::floor(pos));
    const double s = pos - static_cast<double>(k);
    const double h = cascade.dt;
    const Vector p0 = cascade.partial_sum(k, cascade.c);
    const Vector p1 = cascade.partial_sum(k + 1, cascade.c);
    const Vector& m0 = cascade.du[k];
    const Vector& m1 = cascade.du[k + 1];
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    Vector v(p0.size());
    for (std::size_t a = 0; a < v.size(); ++a) {
        v[a] = h00 * p0[a] + h10 * h * m0[a] + h01 * p1[a] + h11 * h * m1[a];
    }
    return {std::move(v), true};
}

std::vector<std::uint64_t> catalan(std::size_t c) {
    std::vector<std::uint64_t> alpha(c + 1, 0);
    alpha[0] = 1;
    for (std::size_t i = 0; i < c; ++i) {
        std::uint64_t acc = 0;
        for (std::size_t j = 0; j <= i; ++j) {
            std::uint64_t term = 0;
            if (__builtin_mul_overflow(alpha[j], alpha[i - j], &term) || __builtin_add_overflow(acc, term, &acc)) {
                fail(ErrorKind::CapExceeded, "Catalan number alpha_" + std::to_string(i + 1) + " overflows 64 bits");
            }
        }
        alpha[i + 1] = acc;
    }
    return alpha;
}

double truncation_bound(double K, std::size_t c) {
    require(std::isfinite(K) && K >= 0.0, ErrorKind::Validation, "truncation_bound: K must be non-negative");
    require(K < 1.0, ErrorKind::Precondition, "truncation_bound: K >= 1, the HPM tail diverges");
    return std::pow(K, static_cast<double>(c + 2)) / (1.0 - K);
}

std::size_t min_order_for_tolerance(double K, double eps) {
    require(eps > 0.0, ErrorKind::Validation, "min_order_for_tolerance: eps must be positive");
    for (std::size_t c = 0; c < 100'000; ++c) {
        if (truncation_bound(K, c) <= eps) {
            return c;
        }
    }
    fail(ErrorKind::CapExceeded, "min_order_for_tolerance: no order below 100000 meets the tolerance");
}

}  // namespace qhpm
