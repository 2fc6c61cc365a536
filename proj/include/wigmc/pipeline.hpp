#pragma once

#include <string>
#include <vector>

#include "wigmc/config.hpp"
#include "wigmc/hamiltonian.hpp"
#include "wigmc/liouville.hpp"
#include "wigmc/markov.hpp"
#include "wigmc/output.hpp"
#include "wigmc/phase_lift.hpp"
#include "wigmc/wigner.hpp"

namespace wigmc {

/// Pieces shared by every subcommand: basis, decomposition, kernel data
/// and the initial function/lift resolved from a run configuration.
struct Problem {
    WeylBasis basis;
    WeylCoefficients coefficients;
    PolarTable polar;
    JumpTable table;
    WignerFunction w0;
    LiftedDistribution phi0;
    ComplexMatrix rho0;

    explicit Problem(const RunConfig& cfg)
        : basis(cfg.dim),
          coefficients(weyl_coefficients(basis, cfg.hamiltonian)),
          polar(polar_decompose(coefficients)),
          table(jump_table(polar, cfg.hbar)),
          w0(cfg.dim) {
        if (cfg.state) {
            const DensityMatrix rho = density_from_state(*cfg.state);
            rho0 = rho.mat;
            w0 = wigner_from_density(basis, rho);
        } else {
            w0 = WignerFunction(cfg.dim, *cfg.wigner_init);
            rho0 = density_from_wigner(basis, w0);
        }
        phi0 = lift_two_atom(w0);
    }
};

/// Exact snapshots for the configured times, as Wigner value arrays.
inline std::vector<RealMatrix> exact_snapshots(const Problem& problem, const RunConfig& cfg) {
    const EvolutionResult exact = evolve_unitary(problem.basis, DensityMatrix{problem.rho0},
                                                 cfg.hamiltonian, cfg.observation_times,
                                                 cfg.hbar);
    std::vector<RealMatrix> out;
    out.reserve(exact.states.size());
    for (const auto& w : exact.states) out.push_back(w.values());
    return out;
}

struct SimulationOutput {
    RunResult run;
    std::vector<RealMatrix> exact;
    std::vector<CsvRow> rows;
    Json metadata;
};

/// Full simulate pipeline: stochastic run plus the exact oracle column,
/// assembled into the documented CSV rows and the metadata echo.
inline SimulationOutput run_simulation(const RunConfig& cfg, const Problem& problem) {
    SimulationOutput out;
    const MarkovEngine engine(problem.table, cfg.engine_config());
    out.run = engine.run(problem.phi0, cfg.particles, cfg.observation_times);
    out.exact = exact_snapshots(problem, cfg);
    for (std::size_t k = 0; k < out.run.snapshots.size(); ++k)
        append_snapshot_rows(out.rows, out.run.snapshots[k].time, cfg.dim,
                             out.run.snapshots[k].stats.value,
                             out.run.snapshots[k].stats.std_error, out.exact[k]);
    out.metadata = run_metadata(cfg, problem.table, problem.phi0.total_mass(), out.run);
    return out;
}

inline SimulationOutput run_simulation(const RunConfig& cfg) {
    const Problem problem(cfg);
    return run_simulation(cfg, problem);
}

struct CoverageStats {
    std::size_t cells = 0;
    std::size_t within = 0;

    double fraction() const {
        return cells == 0 ? 1.0 : static_cast<double>(within) / static_cast<double>(cells);
    }
};

/// Counts (site, time) cells whose estimate lies within `sigmas` standard
/// errors of the exact value.
inline CoverageStats coverage(const RunResult& run, const std::vector<RealMatrix>& exact,
                              double sigmas = 3.0) {
    CoverageStats stats;
    for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
        const auto& est = run.snapshots[k].stats;
        for (Eigen::Index i = 0; i < est.value.rows(); ++i)
            for (Eigen::Index j = 0; j < est.value.cols(); ++j) {
                ++stats.cells;
                const double diff = std::abs(est.value(i, j) - exact[k](i, j));
                if (diff <= sigmas * est.std_error(i, j) + 1e-12) ++stats.within;
            }
    }
    return stats;
}

}  // namespace wigmc
