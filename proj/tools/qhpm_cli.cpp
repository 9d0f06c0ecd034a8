// Command-line front end: run / sweep / embed / hpm / bounds / gen.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qhpm/embedding.hpp"
#include "qhpm/experiment.hpp"
#include "qhpm/hpm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::string config;
    std::string out = ".";
    bool force = false;
    std::optional<std::uint64_t> seed;
};

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    qhpm::require(static_cast<bool>(os), qhpm::ErrorKind::Io, "cannot write " + path.string());
    return os;
}

fs::path out_dir(const Globals& g) {
    fs::path dir(g.out);
    fs::create_directories(dir);
    return dir;
}

qhpm::RunConfig load(const Globals& g) {
    qhpm::require(!g.config.empty(), qhpm::ErrorKind::Validation, "--config is required for this subcommand");
    qhpm::RunConfig cfg = qhpm::load_config(g.config, g.seed);
    cfg.force = cfg.force || g.force;
    return cfg;
}

void write_json(const fs::path& path, const json& j) {
    auto os = open_out(path);
    os << j.dump(2) << '\n';
}

void write_checks_csv(const fs::path& path, const qhpm::RunReport& rep) {
    auto os = open_out(path);
    os.precision(17);
    os << "check,precondition_ok,measured,bound,pass\n";
    for (const auto* list : {&rep.checks, &rep.appendix_checks}) {
        for (const auto& c : *list) {
            os << c.name << ',' << (c.precondition_ok ? "true" : "false") << ',';
            if (c.measured) os << *c.measured;
            os << ',' << c.bound << ',' << (c.pass ? "true" : "false") << '\n';
        }
    }
}

qhpm::QuadraticODE working_system(const qhpm::RunConfig& cfg) {
    const qhpm::ModelOptions mopts{cfg.assume_valid, cfg.overrides.dense_cap.value_or(qhpm::kDefaultDenseCap)};
    const qhpm::NonlinearityParams np = qhpm::compute_K(cfg.ode, mopts);
    return qhpm::rescale(cfg.ode, cfg.overrides.zeta.value_or(qhpm::default_zeta(np)));
}

int cmd_run(const Globals& g, const std::string& solver, std::optional<double> tol,
            const std::string& emit_blocks) {
    qhpm::RunConfig cfg = load(g);
    if (!solver.empty()) {
        cfg.overrides.solver = solver;
        cfg.source["overrides"]["solver"] = solver;
    }
    if (tol) {
        cfg.overrides.tol = tol;
        cfg.source["overrides"]["tol"] = *tol;
    }
    qhpm::RunHooks hooks;
    if (!emit_blocks.empty()) hooks.emit_blocks = fs::path(emit_blocks);
    const qhpm::RunReport rep = qhpm::run(cfg, hooks);

    const fs::path dir = out_dir(g);
    write_json(dir / "report.json", qhpm::to_json(rep));
    write_json(dir / "timings.json", qhpm::timings_json(rep));
    write_checks_csv(dir / "checks.csv", rep);

    std::cout.precision(6);
    std::cout << "status " << rep.status << "  c=" << rep.params.c << " m=" << rep.params.m << " k=" << rep.params.k
              << " N=" << rep.N << "  final_error=" << rep.budget.final_error << " (epsilon " << cfg.epsilon << ")\n";
    for (const auto& w : rep.warnings) {
        std::cout << "warning: " << w << '\n';
    }
    return rep.exit_code();
}

int cmd_sweep(const Globals& g, const std::string& param, const std::vector<double>& values) {
    const qhpm::RunConfig cfg = load(g);
    const auto rows = qhpm::sweep(cfg, param, values);
    const fs::path path = out_dir(g) / ("sweep_" + param + ".csv");
    auto os = open_out(path);
    qhpm::write_sweep_csv(os, rows);
    std::cout << "wrote " << rows.size() << " rows to " << path.string() << '\n';
    return 0;
}

int cmd_embed(const Globals& g, std::size_t c) {
    const qhpm::RunConfig cfg = load(g);
    const qhpm::QuadraticODE work = working_system(cfg);
    const qhpm::EmbeddedSystem sys =
        qhpm::embed(work, c, cfg.overrides.N_cap.value_or(qhpm::kDefaultEmbeddingCap));
    const fs::path dir = out_dir(g);
    qhpm::write_triplets_file((dir / "A.txt").string(), sys.A);
    {
        auto os = open_out(dir / "y_in.txt");
        qhpm::write_vector(os, sys.y_in);
    }
    json offsets = json::array();
    for (std::size_t i = 0; i <= c; ++i) {
        json level = json::array();
        for (std::size_t j = 0; j < sys.index.beta(i); ++j) level.push_back(sys.index.offset(i, j));
        offsets.push_back(level);
    }
    write_json(dir / "embedding.json", {{"c", c},
                                        {"n", sys.index.n()},
                                        {"beta", sys.index.betas()},
                                        {"N", sys.index.N()},
                                        {"nnz", sys.A.nnz()},
                                        {"norm_A", sys.norm_A},
                                        {"offsets", offsets}});
    std::cout << "N=" << sys.index.N() << " nnz=" << sys.A.nnz() << '\n';
    return 0;
}

int cmd_hpm(const Globals& g, std::size_t c) {
    const qhpm::RunConfig cfg = load(g);
    const qhpm::QuadraticODE work = working_system(cfg);
    const qhpm::HpmCascade cas = qhpm::solve_cascade(work, c, cfg.T);
    auto os = open_out(out_dir(g) / "hpm.csv");
    os.precision(17);
    os << "t,i,norm_nu_i,bound_K_pow\n";
    for (std::size_t t = 0; t < cas.times.size(); ++t) {
        for (std::size_t i = 0; i <= c; ++i) {
            os << cas.times[t] << ',' << i << ',' << qhpm::norm2(cas.nu[t][i]) << ','
               << std::pow(cas.K, static_cast<double>(i + 1)) << '\n';
        }
    }
    std::cout << "K=" << cas.K << " steps=" << cas.steps() << '\n';
    return 0;
}

int cmd_bounds(const Globals& g) {
    const qhpm::RunConfig cfg = load(g);
    const qhpm::RunReport rep = qhpm::run(cfg);
    write_json(out_dir(g) / "bounds.json", qhpm::bounds_report(rep));
    std::cout << "status " << rep.status << '\n';
    return rep.exit_code();
}

int cmd_gen(const Globals& g, std::size_t n, std::size_t s, double K, std::optional<double> u_norm, double T,
            double eps) {
    const std::uint64_t seed = g.seed.value_or(0);
    const qhpm::QuadraticODE ode = qhpm::generate_instance(n, s, K, seed, u_norm);
    const fs::path dir = out_dir(g);
    qhpm::write_triplets_file((dir / "F1.txt").string(), ode.F1);
    qhpm::write_triplets_file((dir / "F2.txt").string(), ode.F2);
    write_json(dir / "config.json", {{"n", n},
                                     {"F1_path", "F1.txt"},
                                     {"F2_path", "F2.txt"},
                                     {"u_in", ode.u_in},
                                     {"T", T},
                                     {"epsilon", eps},
                                     {"generated_from", {{"n", n}, {"s", s}, {"K", K}, {"seed", seed}}}});
    std::cout << "wrote " << (dir / "config.json").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Homotopy perturbation embedding simulator and bound checker"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config, "JSON configuration file");
    app.add_option("--out", g.out, "Output directory");
    app.add_flag("--force", g.force, "Downgrade failed preconditions to warnings");
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed for generated instances");

    auto* run = app.add_subcommand("run", "Run the full pipeline and write report.json");
    std::string solver;
    std::optional<double> tol;
    std::string emit_blocks;
    run->add_option("--solver", solver, "forward or iterative")->check(CLI::IsMember({"forward", "iterative"}));
    run->add_option("--tol", tol, "Residual target for the marching solve");
    run->add_option("--emit-blocks", emit_blocks, "Directory receiving every x_{i,0}");

    auto* sweep = app.add_subcommand("sweep", "Rerun the pipeline over a parameter list");
    std::string param;
    std::vector<double> values;
    sweep->add_option("--param", param, "c, k, T or epsilon")->required()->check(CLI::IsMember({"c", "k", "T", "epsilon"}));
    sweep->add_option("--values", values, "Comma-separated values")->delimiter(',');

    auto* embed = app.add_subcommand("embed", "Write A, y_in and the index sidecar");
    std::size_t c = 1;
    embed->add_option("--c", c, "Truncation order")->required();

    auto* hpm = app.add_subcommand("hpm", "Write per-order cascade norms as CSV");
    std::size_t hc = 1;
    hpm->add_option("--c", hc, "Truncation order")->required();

    auto* bounds = app.add_subcommand("bounds", "Write the measured-vs-bound JSON report");

    auto* gen = app.add_subcommand("gen", "Generate a random instance");
    std::size_t n = 2;
    std::size_t s = 2;
    double K = 0.3;
    std::optional<double> u_norm;
    double T = 1.0;
    double eps = 1e-2;
    gen->add_option("--n", n, "Dimension")->required();
    gen->add_option("--s", s, "Sparsity")->required();
    gen->add_option("--K", K, "Target nonlinearity")->required();
    gen->add_option("--u-norm", u_norm, "Norm of u_in");
    gen->add_option("--T", T, "Final time written to the config");
    gen->add_option("--epsilon", eps, "Tolerance written to the config");

    CLI11_PARSE(app, argc, argv);
    if (seed_opt->count() > 0) g.seed = seed_value;

    try {
        if (*run) return cmd_run(g, solver, tol, emit_blocks);
        if (*sweep) return cmd_sweep(g, param, values);
        if (*embed) return cmd_embed(g, c);
        if (*hpm) return cmd_hpm(g, hc);
        if (*bounds) return cmd_bounds(g);
        if (*gen) return cmd_gen(g, n, s, K, u_norm, T, eps);
    } catch (const qhpm::Error& e) {
        std::cerr << "error (" << qhpm::to_string(e.kind()) << "): " << e.what() << '\n';
        return qhpm::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
