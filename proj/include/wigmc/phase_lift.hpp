#pragma once

#include <cmath>
#include <vector>

#include "wigmc/lattice_algebra.hpp"
#include "wigmc/wigner.hpp"

namespace wigmc {

/// One delta-atom of the lifted distribution phi(alpha, m, n).
struct PhaseAtom {
    PhasePoint site;
    double alpha = 0.0;   // in [0, 2*pi)
    double weight = 0.0;  // >= 0
};

/// Non-negative lift of a Wigner function onto U(1) x Z_N x Z_N with
/// value(m,n) = sum of w * cos(alpha) over the atoms at (m,n). Atoms come
/// in mirror pairs (alpha, 2*pi - alpha) and never sit at alpha = 0 or pi.
struct LiftedDistribution {
    int dim = 0;
    std::vector<PhaseAtom> atoms;

    double total_mass() const {
        double s = 0.0;
        for (const auto& a : atoms) s += a.weight;
        return s;
    }
};

/// Default lift: per site, one mirror pair at +-pi/3 for positive values
/// and +-2*pi/3 for negative ones. Both pairs satisfy 2|cos(alpha0)| = 1,
/// so each atom carries weight |value| and contraction is exact.
inline LiftedDistribution lift_two_atom(const WignerFunction& w) {
    const int dim = w.dim();
    LiftedDistribution phi;
    phi.dim = dim;
    for (int m = -half_span(dim); m <= half_span(dim); ++m)
        for (int n = -half_span(dim); n <= half_span(dim); ++n) {
            const double v = w.value(m, n);
            if (v == 0.0) continue;
            const double alpha0 = v > 0.0 ? kPi / 3.0 : 2.0 * kPi / 3.0;
            const double weight = std::abs(v) / (2.0 * std::abs(std::cos(alpha0)));
            phi.atoms.push_back({{m, n}, alpha0, weight});
            phi.atoms.push_back({{m, n}, kTwoPi - alpha0, weight});
        }
    return phi;
}

/// Integrates out the phase: value(m,n) = sum w * cos(alpha). Summing the
/// cosine directly keeps the result exactly real; the sine parts of mirror
/// pairs cancel identically and are never formed.
inline WignerFunction contract(const LiftedDistribution& phi) {
    WignerFunction w(phi.dim);
    for (const auto& a : phi.atoms) w.at(a.site.m, a.site.n) += a.weight * std::cos(a.alpha);
    return w;
}

}  // namespace wigmc
