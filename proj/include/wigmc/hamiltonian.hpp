#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wigmc/lattice_algebra.hpp"
#include "wigmc/wigner.hpp"

namespace wigmc {

/// Weyl expansion coefficients H~(m,n) with H = sum W(m,n) H~(m,n).
struct WeylCoefficients {
    int dim = 0;
    ComplexMatrix table;  // (row, col) = (index of m, index of n)

    Complex value(int m, int n) const {
        return table(site_to_index(dim, m), site_to_index(dim, n));
    }
};

/// Polar form H~(m,n) = h(m,n) * omega^{theta(m,n)} with h >= 0 and the
/// phase exponent theta in [0, N). theta is real-valued, not integer.
struct PolarTable {
    int dim = 0;
    RealMatrix magnitude;
    RealMatrix phase_exponent;

    double magnitude_at(int m, int n) const {
        return magnitude(site_to_index(dim, m), site_to_index(dim, n));
    }
    double theta_at(int m, int n) const {
        return phase_exponent(site_to_index(dim, m), site_to_index(dim, n));
    }
};

struct JumpEntry {
    int dm = 0;
    int dn = 0;
    double strength = 0.0;     // h(dm,dn)
    double probability = 0.0;  // strength / total_strength
    double theta = 0.0;        // phase exponent of the displacement
    double cumulative = 0.0;   // running sum of probabilities, for sampling
};

/// Stochastic jump data derived from the polar table. The origin
/// displacement (0,0) is excluded: with theta(0,0)=0 its two phase
/// branches cancel exactly, so keeping it would only waste jumps.
struct JumpTable {
    int dim = 0;
    std::vector<JumpEntry> entries;
    double total_strength = 0.0;   // sum of off-origin h(m,n)
    double origin_strength = 0.0;  // h(0,0), reported in run metadata
    double rate = 0.0;             // D = 2 * total_strength / hbar

    bool free_evolution() const { return entries.empty(); }
};

/// Extracts H~(m,n) = Tr[W(m,n)^dagger H] / N. Rejects non-Hermitian input.
inline WeylCoefficients weyl_coefficients(const WeylBasis& basis, const ComplexMatrix& h) {
    const int dim = basis.dim();
    if (h.rows() != dim || h.cols() != dim)
        throw std::invalid_argument("hamiltonian dimension does not match basis");
    if (hermiticity_deviation(h) > 1e-10)
        throw std::invalid_argument("hamiltonian is not Hermitian to 1e-10");
    WeylCoefficients c{dim, ComplexMatrix::Zero(dim, dim)};
    for (int m = -half_span(dim); m <= half_span(dim); ++m)
        for (int n = -half_span(dim); n <= half_span(dim); ++n)
            c.table(site_to_index(dim, m), site_to_index(dim, n)) =
                (basis.weyl(m, n).adjoint() * h).trace() / static_cast<double>(dim);
    return c;
}

inline ComplexMatrix reconstruct_hamiltonian(const WeylBasis& basis, const WeylCoefficients& c) {
    const int dim = basis.dim();
    ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
    for (int m = -half_span(dim); m <= half_span(dim); ++m)
        for (int n = -half_span(dim); n <= half_span(dim); ++n)
            h += basis.weyl(m, n) * c.value(m, n);
    return h;
}

/// Splits the coefficients into magnitude and phase exponent. Entries
/// below 1e-12 relative to the largest magnitude get theta = 0.
inline PolarTable polar_decompose(const WeylCoefficients& c) {
    const int dim = c.dim;
    PolarTable p{dim, RealMatrix::Zero(dim, dim), RealMatrix::Zero(dim, dim)};
    const double floor = 1e-12 * c.table.cwiseAbs().maxCoeff();
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            const Complex v = c.table(i, j);
            const double mag = std::abs(v);
            p.magnitude(i, j) = mag;
            if (mag > floor) {
                double theta = dim * std::arg(v) / kTwoPi;
                if (theta < 0.0) theta += dim;
                p.phase_exponent(i, j) = theta;
            }
        }
    return p;
}

/// Builds the jump table. hbar fixes the rate through D = 2|h|/hbar; an
/// all-zero off-origin table means free evolution (D = 0, nothing moves).
inline JumpTable jump_table(const PolarTable& p, double hbar = 1.0) {
    if (hbar <= 0.0) throw std::invalid_argument("hbar must be positive");
    const int dim = p.dim;
    JumpTable t;
    t.dim = dim;
    t.origin_strength = p.magnitude_at(0, 0);
    const double floor = 1e-12 * p.magnitude.maxCoeff();
    for (int m = -half_span(dim); m <= half_span(dim); ++m)
        for (int n = -half_span(dim); n <= half_span(dim); ++n) {
            if (m == 0 && n == 0) continue;
            const double mag = p.magnitude_at(m, n);
            if (mag <= floor) continue;
            t.entries.push_back({m, n, mag, 0.0, p.theta_at(m, n), 0.0});
            t.total_strength += mag;
        }
    double cum = 0.0;
    for (auto& e : t.entries) {
        e.probability = e.strength / t.total_strength;
        cum += e.probability;
        e.cumulative = cum;
    }
    if (!t.entries.empty()) t.entries.back().cumulative = 1.0;
    t.rate = 2.0 * t.total_strength / hbar;
    return t;
}

}  // namespace wigmc
