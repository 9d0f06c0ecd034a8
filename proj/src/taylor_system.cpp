#include "qhpm/taylor_system.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Sparse>
#include <boost/multiprecision/cpp_int.hpp>
#include <unsupported/Eigen/IterativeSolvers>

#include "qhpm/hpm.hpp"

namespace qhpm {

namespace {

using boost::multiprecision::cpp_int;

void check_or_warn(bool ok, bool force, std::vector<std::string>& warnings, const std::string& what) {
    if (ok) {
        return;
    }
    if (!force) {
        fail(ErrorKind::Precondition, what);
    }
    warnings.push_back(what);
}

}  // namespace

OrderChoice select_order(const NonlinearityParams& np, double epsilon, double eta) {
    require(epsilon > 0.0 && std::isfinite(epsilon), ErrorKind::Validation, "epsilon must be positive");
    require(eta > 0.0 && std::isfinite(eta), ErrorKind::Validation, "eta must be positive");
    require(np.K < 1.0, ErrorKind::Precondition, "K >= 1: the homotopy series does not converge");
    OrderChoice out;
    out.epsilon1 = epsilon * np.norm_u_in / (4.0 * eta);
    if (np.K == 0.0) {
        return out;
    }
    const double arg = 4.0 * np.norm_u_in / ((1.0 - np.K) * epsilon * eta);
    const double raw = std::log(arg) / std::log(1.0 / np.K);
    out.c_formula = raw <= 0.0 ? 0 : static_cast<std::size_t>(std::ceil(raw - 1e-12));
    out.c_scan = min_order_for_tolerance(np.K, out.epsilon1);
    out.c = std::max(out.c_formula, out.c_scan);
    return out;
}

MarchingGrid marching_grid(double T, double norm_A) {
    require(std::isfinite(T) && T >= 0.0, ErrorKind::Validation, "T must be finite and non-negative");
    MarchingGrid g;
    const double steps = std::ceil(T * norm_A - 1e-12);
    g.m = std::max<std::size_t>(1, static_cast<std::size_t>(std::max(0.0, steps)));
    g.p = g.m;
    g.h = T / static_cast<double>(g.m);
    return g;
}

bool factorial_at_least(std::size_t k_plus_1, double x) {
    if (!(x > 1.0)) {
        return true;
    }
    require(std::isfinite(x), ErrorKind::Validation, "factorial target must be finite");
    cpp_int fact = 1;
    for (std::size_t i = 2; i <= k_plus_1; ++i) {
        fact *= i;
    }
    return fact >= cpp_int(std::ceil(x));
}

std::size_t taylor_order_for(double Omega) {
    require(std::isfinite(Omega) && Omega > 0.0, ErrorKind::Validation, "Omega must be positive and finite");
    std::size_t k = 1;
    const double lo = std::log(Omega);
    if (lo > 1.0) {
        k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(2.0 * lo / std::log(lo))));
    }
    while (!factorial_at_least(k + 1, Omega)) {
        ++k;
    }
    return k;
}

TaylorSystemParams select_parameters(const NonlinearityParams& np, const EmbeddedSystem& sys, double T,
                                     double epsilon, double g, double eta, const SelectionOptions& opts) {
    require(epsilon > 0.0 && std::isfinite(epsilon), ErrorKind::Validation, "epsilon must be positive");
    require(g >= 1.0 - 1e-12 && std::isfinite(g), ErrorKind::Validation, "g must be at least 1");
    require(eta > 0.0 && std::isfinite(eta), ErrorKind::Validation, "eta must be positive");

    TaylorSystemParams p;
    p.c = sys.index.c();
    p.T = T;
    p.epsilon = epsilon;
    p.g = g;
    p.eta = eta;
    p.eta_prime = np.norm_u_in > 0.0 ? eta * np.K / np.norm_u_in : 0.0;
    p.epsilon1 = epsilon * np.norm_u_in / (4.0 * eta);

    const double one_minus = 1.0 - 2.0 * np.K * np.K;
    check_or_warn(np.below_postselect_limit(), opts.force, p.warnings,
                  "nonlinearity too strong: K = " + std::to_string(np.K) +
                      " must be below sqrt(2)/2 for the level post-selection bound");
    if (p.eta_prime > 0.0 && one_minus > 0.0) {
        const double eps_max = 0.1 * std::sqrt(one_minus) / p.eta_prime;
        check_or_warn(epsilon <= eps_max, opts.force, p.warnings,
                      "epsilon = " + std::to_string(epsilon) + " exceeds 0.1*sqrt(1-2K^2)/eta' = " +
                          std::to_string(eps_max));
    }
    check_or_warn(np.expm_bound_holds_for(p.c), opts.force, p.warnings,
                  "(c+1)*||F2||/|Re lambda1| > 1 at c = " + std::to_string(p.c) +
                      "; the propagator bound needs c <= " +
                      (np.expm_bound_holds_for(0) ? std::to_string(np.max_order_for_expm_bound())
                                                  : std::string("none (fails even at c = 0)")));

    const MarchingGrid grid = marching_grid(T, sys.norm_A);
    p.m = opts.m.value_or(grid.m);
    p.p = opts.p.value_or(opts.m ? p.m : grid.p);
    require(p.m >= 1 && p.p >= 1, ErrorKind::Validation, "m and p must be at least 1");
    p.h = opts.h.value_or(T / static_cast<double>(p.m));
    require(p.h >= 0.0 && std::isfinite(p.h), ErrorKind::Validation, "h must be non-negative");
    check_or_warn(p.h * sys.norm_A <= 1.0 + 1e-12, opts.force, p.warnings,
                  "||A h|| = " + std::to_string(p.h * sys.norm_A) + " exceeds 1");

    // √(1−2K²)/η′ can only exceed 1 when K is tiny; the tolerance never needs to grow past ε.
    double factor = 1.0;
    if (p.eta_prime > 0.0) {
        factor = std::min(1.0, std::sqrt(std::max(0.0, one_minus)) / p.eta_prime);
    }
    p.delta = epsilon * factor / (30.0 * std::sqrt(78.0 * static_cast<double>(p.m)) * g);
    require(p.delta > 0.0, ErrorKind::Precondition, "solver tolerance delta is zero (1 - 2K^2 <= 0)");
    const double cc = static_cast<double>(p.c);
    p.Omega = 50.0 * static_cast<double>(p.m) * (cc + 1.0) * (cc + 2.0) * g / p.delta;

    if (opts.k) {
        p.k = *opts.k;
        require(p.k >= 1, ErrorKind::Validation, "k must be at least 1");
        check_or_warn(factorial_at_least(p.k + 1, p.Omega), opts.force, p.warnings,
                      "(k+1)! < Omega = " + std::to_string(p.Omega) + " at k = " + std::to_string(p.k));
    } else {
        p.k = taylor_order_for(p.Omega);
    }
    check_or_warn(factorial_at_least(p.k + 1, 2.0 * static_cast<double>(p.m) * (cc + 1.0) * (cc + 2.0)), opts.force,
                  p.warnings, "2m(c+1)(c+2) > (k+1)! at k = " + std::to_string(p.k));
    return p;
}

SparseMatrix assemble_C(const SparseMatrix& A, const TaylorSystemParams& params) {
    require(A.rows() == A.cols(), ErrorKind::Validation, "assemble_C: A must be square");
    const std::size_t N = A.rows();
    const std::size_t m = params.m;
    const std::size_t k = params.k;
    const std::size_t blocks = params.blocks();
    const std::size_t rows = blocks * N;

    std::vector<std::size_t> row_ptr{0};
    std::vector<std::size_t> col_idx;
    std::vector<double> values;
    row_ptr.reserve(rows + 1);
    col_idx.reserve(rows + static_cast<std::size_t>(m) * k * A.nnz() + rows);
    values.reserve(col_idx.capacity());

    auto push = [&](std::size_t col, double v) {
        if (v != 0.0) {
            col_idx.push_back(col);
            values.push_back(v);
        }
    };

    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t step = b / (k + 1);
        const std::size_t inner = b % (k + 1);
        for (std::size_t r = 0; r < N; ++r) {
            const std::size_t diag = b * N + r;
            if (b == 0) {
                // x_{0,0} = y_in
            } else if (step < m && inner > 0) {
                // x_{i,j} = (A h / j) x_{i,j−1}
                const double scale = -params.h / static_cast<double>(inner);
                const auto row = A.row(r);
                for (std::size_t e = 0; e < row.cols.size(); ++e) {
                    push((b - 1) * N + row.cols[e], scale * row.values[e]);
                }
            } else if (b <= m * (k + 1) && inner == 0) {
                // x_{i+1,0} = Σ_j x_{i,j}
                const std::size_t first = (step - 1) * (k + 1);
                for (std::size_t j = 0; j <= k; ++j) {
                    push((first + j) * N + r, -1.0);
                }
            } else {
                // copies of the final state
                push((b - 1) * N + r, -1.0);
            }
            push(diag, 1.0);
            row_ptr.push_back(col_idx.size());
        }
    }
    return SparseMatrix::from_csr(rows, rows, std::move(row_ptr), std::move(col_idx), std::move(values));
}

Vector marching_rhs(std::span<const double> y_in, const TaylorSystemParams& params) {
    Vector b(params.blocks() * y_in.size(), 0.0);
    std::copy(y_in.begin(), y_in.end(), b.begin());
    return b;
}

SolverKind parse_solver(const std::string& name) {
    if (name == "forward") return SolverKind::Forward;
    if (name == "iterative") return SolverKind::Iterative;
    fail(ErrorKind::Validation, "unknown solver '" + name + "' (expected forward or iterative)");
}

const char* to_string(SolverKind kind) { return kind == SolverKind::Forward ? "forward" : "iterative"; }

std::span<const double> MarchingSolution::block(std::size_t i, std::size_t j) const {
    require(i <= m, ErrorKind::Validation, "block: step index out of range");
    require(i < m ? j <= k : j <= p, ErrorKind::Validation, "block: inner index out of range");
    const std::size_t b = i * (k + 1) + j;
    return std::span<const double>(x).subspan(b * N, N);
}

namespace {

Vector forward_substitution(const SparseMatrix& C, std::span<const double> rhs) {
    const std::size_t n = C.rows();
    Vector x(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = C.row(r);
        double s = rhs[r];
        double diag = 0.0;
        for (std::size_t e = 0; e < row.cols.size(); ++e) {
            const std::size_t col = row.cols[e];
            if (col < r) {
                s -= row.values[e] * x[col];
            } else if (col == r) {
                diag = row.values[e];
            } else {
                fail(ErrorKind::Validation, "forward substitution needs a lower-triangular matrix");
            }
        }
        require(diag != 0.0, ErrorKind::Numerical, "forward substitution hit a zero pivot");
        x[r] = s / diag;
    }
    return x;
}

Vector gmres_solve(const SparseMatrix& C, std::span<const double> rhs, std::size_t restart, double tol) {
    using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
    const auto n = static_cast<Eigen::Index>(C.rows());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(C.nnz());
    for (const auto& t : C.triplets()) {
        trips.emplace_back(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col), t.value);
    }
    SpMat M(n, n);
    M.setFromTriplets(trips.begin(), trips.end());
    Eigen::GMRES<SpMat, Eigen::IdentityPreconditioner> solver;
    solver.set_restart(static_cast<int>(restart));
    solver.setTolerance(tol);
    solver.setMaxIterations(static_cast<Eigen::Index>(8 * restart + 100));
    solver.compute(M);
    const Eigen::Map<const Eigen::VectorXd> b(rhs.data(), n);
    const Eigen::VectorXd x = solver.solve(b);
    require(x.allFinite(), ErrorKind::Numerical, "GMRES produced non-finite values");
    return Vector(x.data(), x.data() + x.size());
}

double relative_residual(const SparseMatrix& C, std::span<const double> x, std::span<const double> rhs) {
    const Vector cx = spmv(C, x);
    const double nb = norm2(rhs);
    const double r = distance(cx, rhs);
    return nb > 0.0 ? r / nb : r;
}

}  // namespace

MarchingSolution solve_marching(const SparseMatrix& C, std::span<const double> y_in, const TaylorSystemParams& params,
                                SolverKind solver, double tol) {
    const std::size_t N = y_in.size();
    require(C.rows() == C.cols() && C.rows() == params.blocks() * N, ErrorKind::Validation,
            "solve_marching: C does not match (d+1) * N");
    const Vector rhs = marching_rhs(y_in, params);
    double target = params.delta > 0.0 ? std::min(params.delta, 1e-10) : 1e-10;
    if (tol > 0.0) {
        target = tol;
    }

    MarchingSolution sol;
    sol.N = N;
    sol.m = params.m;
    sol.k = params.k;
    sol.p = params.p;
    sol.solver = solver;

    if (solver == SolverKind::Forward) {
        sol.x = forward_substitution(C, rhs);
        sol.relative_residual = relative_residual(C, sol.x, rhs);
        if (sol.relative_residual <= target) {
            return sol;
        }
        sol.used_fallback = true;
    }
    sol.x = gmres_solve(C, rhs, params.d() + 2, 0.1 * target);
    sol.relative_residual = relative_residual(C, sol.x, rhs);
    require(sol.relative_residual <= target, ErrorKind::Numerical,
            "marching solve missed the residual target: " + std::to_string(sol.relative_residual) + " > " +
                std::to_string(target));
    return sol;
}

double condition_bound(std::size_t m, std::size_t k, std::size_t p, std::size_t c) {
    return 2.0 * std::numbers::e * std::sqrt(static_cast<double>(k)) * static_cast<double>(m * (k + 1) + p) *
           static_cast<double>(c + 2);
}

ConditionReport condition_report(const SparseMatrix& C, const TaylorSystemParams& params, std::size_t dense_cap) {
    ConditionReport rep;
    rep.bound = condition_bound(params.m, params.k, params.p, params.c);
    const std::size_t n = C.rows();
    if (n > 0 && n <= dense_cap / n) {
        rep.measured = true;
        rep.kappa = dense_condition_number(DenseMatrix::from_sparse(C, dense_cap));
    }
    return rep;
}

double marching_error_bound(std::size_t j, std::size_t c, std::size_t k, double norm_y_in) {
    const double cc = static_cast<double>(c);
    return 2.0 * static_cast<double>(j) * (cc + 1.0) * (cc + 2.0) * norm_y_in / std::tgamma(static_cast<double>(k) + 2.0);
}

}  // namespace qhpm
