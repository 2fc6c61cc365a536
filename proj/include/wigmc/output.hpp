#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "wigmc/config.hpp"
#include "wigmc/hamiltonian.hpp"
#include "wigmc/liouville.hpp"
#include "wigmc/markov.hpp"
#include "wigmc/version.hpp"

namespace wigmc {

/// Shortest representation that round-trips a double; identical inputs
/// always format to identical bytes.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CsvRow {
    double t = 0.0;
    int m = 0;
    int n = 0;
    double rho_est = 0.0;
    double std_error = 0.0;
    double rho_exact = 0.0;
    double abs_err = 0.0;
};

inline constexpr const char* kCsvHeader = "t,m,n,rho_est,stderr,rho_exact,abs_err";

inline void write_csv(std::ostream& out, const std::vector<CsvRow>& rows) {
    out << kCsvHeader << '\n';
    for (const auto& r : rows)
        out << format_double(r.t) << ',' << r.m << ',' << r.n << ','
            << format_double(r.rho_est) << ',' << format_double(r.std_error) << ','
            << format_double(r.rho_exact) << ',' << format_double(r.abs_err) << '\n';
}

inline void write_csv_file(const std::string& path, const std::vector<CsvRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(out, rows);
}

/// Rows for one snapshot, sites in descending-label order (m outer, n
/// inner), matching every other table in the project.
inline void append_snapshot_rows(std::vector<CsvRow>& rows, double t, int dim,
                                 const RealMatrix& estimate, const RealMatrix& std_error,
                                 const RealMatrix& exact) {
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            CsvRow r;
            r.t = t;
            r.m = index_to_site(dim, i);
            r.n = index_to_site(dim, j);
            r.rho_est = estimate(i, j);
            r.std_error = std_error(i, j);
            r.rho_exact = exact(i, j);
            r.abs_err = std::abs(r.rho_est - r.rho_exact);
            rows.push_back(r);
        }
}

/// Run metadata: a config echo sufficient to reproduce the run bit-exactly
/// plus the derived kernel quantities and the empirical event counters.
inline Json run_metadata(const RunConfig& cfg, const JumpTable& table, double phi0_mass,
                         const RunResult& result) {
    Json meta;
    meta["version"] = kVersion;
    meta["config"] = config_to_json(cfg);
    meta["kernel"] = {{"total_strength", table.total_strength},
                      {"origin_strength", table.origin_strength},
                      {"rate", table.rate},
                      {"displacements", table.entries.size()},
                      {"free_evolution", table.free_evolution()}};
    meta["phi0_mass"] = phi0_mass;
    meta["seed"] = cfg.seed;
    const double particle_time =
        static_cast<double>(result.initial_population) * result.elapsed_time;
    meta["counters"] = {{"jumps", result.counters.jumps},
                        {"branches", result.counters.branches},
                        {"vanishes", result.counters.vanishes},
                        {"resamples", result.counters.resamples},
                        {"vanished_weight", result.counters.vanished_weight}};
    // empirical only; no claim is made about these ratios
    meta["branch_rate"] =
        particle_time > 0.0 ? result.counters.branches / particle_time : 0.0;
    meta["vanish_rate"] =
        particle_time > 0.0 ? result.counters.vanishes / particle_time : 0.0;
    meta["initial_population"] = result.initial_population;
    meta["final_population"] = result.final_population;
    return meta;
}

inline void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

}  // namespace wigmc
