#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qhpm/embedding.hpp"
#include "qhpm/hpm.hpp"
#include "qhpm/measurement.hpp"
#include "qhpm/ode_model.hpp"
#include "qhpm/taylor_system.hpp"

namespace qhpm {

/// Random instance with a normal, dissipative F1 and an s-sparse F2 scaled so
/// that compute_K returns K_target. ‖u_in‖ defaults to K_target (0.5 when
/// K_target = 0). Deterministic for a given seed.
QuadraticODE generate_instance(std::size_t n, std::size_t s, double K_target, std::uint64_t seed,
                               std::optional<double> u_norm = std::nullopt);

struct Overrides {
    std::optional<std::size_t> c, k, m, p;
    std::optional<double> h, g, eta, zeta;
    std::optional<std::string> solver;
    std::optional<double> tol;
    std::optional<std::size_t> dense_cap;
    std::optional<std::size_t> N_cap;
};

struct RunConfig {
    QuadraticODE ode;
    double T = 1.0;
    double epsilon = 1e-2;
    bool assume_valid = false;
    bool force = false;
    std::uint64_t seed = 0;
    Overrides overrides;
    /// The configuration as read, echoed into reports.
    nlohmann::json source;
};

/// Parses a configuration object. Matrix paths are resolved against base_dir.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {},
                       std::optional<std::uint64_t> seed = std::nullopt);
RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt);

/// One measured-vs-bound comparison. `measured` is empty when the check was
/// skipped (for example above the dense-oracle cap).
struct CheckResult {
    std::string name;
    bool precondition_ok = false;
    std::optional<double> measured;
    double bound = 0.0;
    bool pass = false;
    std::string note;
};

struct RunReport {
    std::string status;  // pass, pass_forced or bound_violation
    /// Echo of the configuration, seed and force flag that produced this report.
    nlohmann::json config;
    std::uint64_t seed = 0;
    bool forced = false;
    bool linear_fast_path = false;
    std::vector<std::string> warnings;

    NonlinearityParams original;
    NonlinearityParams working;
    double zeta = 1.0;
    OrderChoice order;
    TaylorSystemParams params;
    std::size_t N = 0;
    std::size_t nnz_A = 0;
    std::size_t nnz_C = 0;
    double norm_A = 0.0;
    std::size_t grid_substeps = 0;

    double eta = 1.0;
    double g = 1.0;
    double g_refined = 1.0;
    std::optional<double> g_dense;
    double reference_error_estimate = 0.0;

    Vector u_reference;  // u(T) of the working system
    Vector u_tilde;      // ũ(T)
    MeasurementReport measurement;
    ErrorBudget budget;
    double solver_residual = 0.0;
    std::string solver;
    std::vector<double> marching_errors;  // ‖e^{Ajh}y_in − x_{j,0}‖, j = 0..m (dense oracle only)
    std::vector<double> level_norms_sq;

    std::vector<CheckResult> checks;
    /// Stand-alone scalar and matrix utilities evaluated on this instance.
    std::vector<CheckResult> appendix_checks;
    std::map<std::string, double> timings;

    [[nodiscard]] const CheckResult& check(const std::string& name) const;
    [[nodiscard]] int exit_code() const;
};

struct RunHooks {
    /// When set, each x_{i,0} is written there as a text vector.
    std::optional<std::filesystem::path> emit_blocks;
};

/// Full pipeline: K, rescale, reference, order, embedding, grid, cascade (g),
/// parameters, marching matrix, solve, post-selection and error budget, with
/// every bound measured. Errors carry the failing stage in their message.
RunReport run(const RunConfig& config, const RunHooks& hooks = {});

/// Everything except timings, deterministic for a fixed configuration.
nlohmann::json to_json(const RunReport& report);
nlohmann::json timings_json(const RunReport& report);

struct SweepRow {
    double value = 0.0;
    std::optional<double> measured_error;
    std::optional<double> bound;
    std::optional<double> kappa_measured;
    std::optional<double> kappa_bound;
    std::optional<double> p1;
    std::optional<double> chi0_sq;
    std::string status;  // run status, or "<error kind>: <message>" for a failed row
};

/// Reruns the pipeline for each value of param ∈ {c, k, T, epsilon}. A failing
/// row is recorded and the sweep continues.
std::vector<SweepRow> sweep(const RunConfig& config, const std::string& param, const std::vector<double>& values);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

/// Per-bound JSON report: every run check plus the stand-alone appendix checks.
nlohmann::json bounds_report(const RunReport& report);

/// Error kind to process exit code: 1 bound violation, 2 precondition or
/// validation, 3 numerical (caps and IO count as validation).
int exit_code_for(ErrorKind kind);

}  // namespace qhpm
