// wigmc: stochastic simulation of wigner-function dynamics on an odd
// lattice phase space, validated against exact evolution.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wigmc/config.hpp"
#include "wigmc/output.hpp"
#include "wigmc/pipeline.hpp"
#include "wigmc/version.hpp"

namespace {

using namespace wigmc;

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<long> particles;
    std::optional<std::string> mode;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
};

void add_common_options(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--config", ov.config_path, "path to the JSON run configuration")
        ->required();
    cmd->add_option("--seed", ov.seed, "override engine.seed");
    cmd->add_option("--particles", ov.particles, "override engine.particles");
    cmd->add_option("--mode", ov.mode, "override engine.mode (event|fixed)")
        ->check(CLI::IsMember({"event", "fixed"}));
    cmd->add_option("--out", ov.out_dir, "override output_dir");
    cmd->add_option("--workers", ov.workers, "override engine.workers");
}

int load_config(const Overrides& ov, RunConfig& cfg) {
    ParseResult parsed = parse_config_file(ov.config_path);
    if (!parsed.ok()) {
        std::cerr << "configuration errors:\n";
        for (const auto& e : parsed.errors) std::cerr << "  - " << e << "\n";
        return 2;
    }
    cfg = *parsed.config;
    if (const char* env = std::getenv("WIGMC_WORKERS")) {
        const int w = std::atoi(env);
        if (w >= 1) cfg.workers = w;
    }
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.particles) cfg.particles = static_cast<std::size_t>(*ov.particles);
    if (ov.mode) cfg.mode = *ov.mode == "fixed" ? EngineMode::FixedStep : EngineMode::EventDriven;
    if (ov.out_dir) cfg.output_dir = *ov.out_dir;
    if (ov.workers) cfg.workers = *ov.workers;
    return 0;
}

std::string ensure_output_dir(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    return cfg.output_dir;
}

int cmd_decompose(const Overrides& ov) {
    RunConfig cfg;
    if (int rc = load_config(ov, cfg)) return rc;
    const Problem problem(cfg);
    std::cout << "# weyl decomposition, N = " << cfg.dim << "\n";
    std::cout << "m,n,re,im,magnitude,theta,probability\n";
    for (int m = -half_span(cfg.dim); m <= half_span(cfg.dim); ++m)
        for (int n = -half_span(cfg.dim); n <= half_span(cfg.dim); ++n) {
            const Complex v = problem.coefficients.value(m, n);
            double prob = 0.0;
            for (const auto& e : problem.table.entries)
                if (e.dm == m && e.dn == n) prob = e.probability;
            std::cout << m << ',' << n << ',' << format_double(v.real()) << ','
                      << format_double(v.imag()) << ','
                      << format_double(problem.polar.magnitude_at(m, n)) << ','
                      << format_double(problem.polar.theta_at(m, n)) << ','
                      << format_double(prob) << "\n";
        }
    std::cout << "# total_strength = " << format_double(problem.table.total_strength)
              << ", rate = " << format_double(problem.table.rate) << "\n";
    if (problem.table.free_evolution())
        std::cout << "# free evolution: no off-origin coefficients, the function is "
                     "stationary\n";
    return 0;
}

int cmd_evolve_exact(const Overrides& ov) {
    RunConfig cfg;
    if (int rc = load_config(ov, cfg)) return rc;
    const Problem problem(cfg);
    const std::vector<RealMatrix> exact = exact_snapshots(problem, cfg);
    std::vector<CsvRow> rows;
    for (std::size_t k = 0; k < exact.size(); ++k)
        append_snapshot_rows(rows, cfg.observation_times[k], cfg.dim, exact[k],
                             RealMatrix::Zero(cfg.dim, cfg.dim), exact[k]);
    const std::string dir = ensure_output_dir(cfg);
    write_csv_file(dir + "/exact.csv", rows);
    std::cout << "wrote " << dir << "/exact.csv (" << rows.size() << " rows)\n";
    return 0;
}

int cmd_simulate(const Overrides& ov) {
    RunConfig cfg;
    if (int rc = load_config(ov, cfg)) return rc;
    const SimulationOutput out = run_simulation(cfg);
    const std::string dir = ensure_output_dir(cfg);
    write_csv_file(dir + "/run.csv", out.rows);
    write_json_file(dir + "/metadata.json", out.metadata);
    std::cout << "wrote " << dir << "/run.csv and " << dir << "/metadata.json\n";
    std::cout << "particles " << out.run.initial_population << " -> "
              << out.run.final_population << ", jumps " << out.run.counters.jumps
              << ", branches " << out.run.counters.branches << ", vanishes "
              << out.run.counters.vanishes << ", resamples " << out.run.counters.resamples
              << "\n";
    return 0;
}

int cmd_validate(const Overrides& ov) {
    RunConfig cfg;
    if (int rc = load_config(ov, cfg)) return rc;
    const SimulationOutput out = run_simulation(cfg);
    const std::string dir = ensure_output_dir(cfg);
    write_csv_file(dir + "/validate.csv", out.rows);
    write_json_file(dir + "/metadata.json", out.metadata);

    const CoverageStats stats = coverage(out.run, out.exact, 3.0);
    const double fraction = stats.fraction();
    std::cout << "coverage: " << stats.within << "/" << stats.cells
              << " site-time cells within 3 standard errors ("
              << format_double(100.0 * fraction) << "%)\n";
    const bool pass = fraction >= 0.95;
    std::cout << (pass ? "PASS" : "FAIL") << ": 3-sigma coverage "
              << (pass ? ">=" : "<") << " 95%\n";
    return pass ? 0 : 1;
}

int cmd_sweep(const Overrides& ov, const std::string& m_list) {
    RunConfig cfg;
    if (int rc = load_config(ov, cfg)) return rc;
    std::vector<std::size_t> counts;
    std::stringstream ss(m_list);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) counts.push_back(static_cast<std::size_t>(std::stod(tok)));
    if (counts.size() < 2) {
        std::cerr << "sweep needs at least two particle counts\n";
        return 2;
    }

    const Problem problem(cfg);
    const std::vector<RealMatrix> exact = exact_snapshots(problem, cfg);
    const std::size_t last = cfg.observation_times.size() - 1;
    constexpr int kSeedsPerCount = 3;

    std::vector<double> log_m, log_err;
    std::ostringstream table;
    table << "particles,sup_error\n";
    for (std::size_t count : counts) {
        double err_sum = 0.0;
        for (int s = 0; s < kSeedsPerCount; ++s) {
            RunConfig c = cfg;
            c.particles = count;
            c.seed = cfg.seed + static_cast<std::uint64_t>(s);
            c.population_cap = 0;
            const MarkovEngine engine(problem.table, c.engine_config());
            const RunResult r = engine.run(problem.phi0, c.particles, c.observation_times);
            err_sum +=
                (r.snapshots[last].stats.value - exact[last]).cwiseAbs().maxCoeff();
        }
        const double err = err_sum / kSeedsPerCount;
        table << count << ',' << format_double(err) << "\n";
        std::cout << "M = " << count << "  sup_error = " << format_double(err) << "\n";
        log_m.push_back(std::log(static_cast<double>(count)));
        log_err.push_back(std::log(err));
    }

    // least-squares slope of log(err) against log(M)
    const double n = static_cast<double>(log_m.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < log_m.size(); ++i) {
        sx += log_m[i];
        sy += log_err[i];
        sxx += log_m[i] * log_m[i];
        sxy += log_m[i] * log_err[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    std::cout << "error-vs-M slope: " << format_double(slope) << "\n";

    const std::string dir = ensure_output_dir(cfg);
    std::ofstream f(dir + "/sweep.csv", std::ios::binary);
    f << table.str();
    std::cout << "wrote " << dir << "/sweep.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wigmc: particle simulation of wigner-function dynamics on an odd "
                 "lattice phase space"};
    app.set_version_flag("--version", std::string(wigmc::kVersion));
    app.require_subcommand(1);

    Overrides ov;
    std::string sweep_m = "1000,10000,100000,1000000";

    CLI::App* decompose =
        app.add_subcommand("decompose", "print the weyl/polar/jump table of the hamiltonian");
    add_common_options(decompose, ov);
    CLI::App* evolve =
        app.add_subcommand("evolve-exact", "exact evolution, written as CSV");
    add_common_options(evolve, ov);
    CLI::App* simulate =
        app.add_subcommand("simulate", "stochastic run with the exact column attached");
    add_common_options(simulate, ov);
    CLI::App* validate = app.add_subcommand(
        "validate", "simulate and gate on 3-sigma agreement with the exact evolution");
    add_common_options(validate, ov);
    CLI::App* sweep =
        app.add_subcommand("sweep", "repeat the run over particle counts, report the slope");
    add_common_options(sweep, ov);
    sweep->add_option("--sweep-m", sweep_m, "comma-separated particle counts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (decompose->parsed()) return cmd_decompose(ov);
        if (evolve->parsed()) return cmd_evolve_exact(ov);
        if (simulate->parsed()) return cmd_simulate(ov);
        if (validate->parsed()) return cmd_validate(ov);
        if (sweep->parsed()) return cmd_sweep(ov, sweep_m);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
