#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "wigmc/hamiltonian.hpp"
#include "wigmc/lattice_algebra.hpp"
#include "wigmc/wigner.hpp"

namespace wigmc {

enum class EvolutionMethod { Unitary, CoefficientOde };

struct EvolutionResult {
    std::vector<double> times;
    std::vector<WignerFunction> states;
    EvolutionMethod method = EvolutionMethod::Unitary;
};

inline void check_times_sorted(const std::vector<double>& times) {
    if (!std::is_sorted(times.begin(), times.end()))
        throw std::invalid_argument("observation times must be sorted ascending");
}

/// Exact evolution rho(t) = exp(-iHt/hbar) rho0 exp(+iHt/hbar) through the
/// eigendecomposition of H, transformed to a Wigner snapshot per time.
inline EvolutionResult evolve_unitary(const WeylBasis& basis, const DensityMatrix& rho0,
                                      const ComplexMatrix& h, const std::vector<double>& times,
                                      double hbar = 1.0) {
    check_times_sorted(times);
    if (hermiticity_deviation(h) > 1e-10)
        throw std::invalid_argument("hamiltonian is not Hermitian to 1e-10");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition of the hamiltonian failed");
    const ComplexMatrix u = es.eigenvectors();
    const Eigen::VectorXd lambda = es.eigenvalues();

    EvolutionResult out;
    out.method = EvolutionMethod::Unitary;
    out.times = times;
    out.states.reserve(times.size());
    const int dim = basis.dim();
    for (double t : times) {
        Eigen::VectorXcd phases(dim);
        for (int i = 0; i < dim; ++i) phases(i) = std::polar(1.0, -lambda(i) * t / hbar);
        const ComplexMatrix prop = u * phases.asDiagonal() * u.adjoint();
        const ComplexMatrix rho_t = prop * rho0.mat * prop.adjoint();
        out.states.push_back(wigner_from_density(basis, rho_t));
    }
    return out;
}

/// The evolution equation of the Wigner function as a constant real
/// N^2 x N^2 operator acting on the column-major flattening of the value
/// array. Built from the polar table; the paired phase terms are complex
/// conjugates, so the operator is real up to rounding, which is checked.
inline RealMatrix liouville_operator(const PolarTable& polar, double hbar = 1.0) {
    if (hbar <= 0.0) throw std::invalid_argument("hbar must be positive");
    const int dim = polar.dim;
    const int sz = dim * dim;
    const auto flat = [dim](int m, int n) {
        return site_to_index(dim, m) + dim * site_to_index(dim, n);
    };
    Eigen::MatrixXcd op = Eigen::MatrixXcd::Zero(sz, sz);
    const double quarter = dim / 4.0;
    for (int m = -half_span(dim); m <= half_span(dim); ++m)
        for (int n = -half_span(dim); n <= half_span(dim); ++n)
            for (int mp = -half_span(dim); mp <= half_span(dim); ++mp)
                for (int np = -half_span(dim); np <= half_span(dim); ++np) {
                    const int dm = wrap_site(dim, m - mp);
                    const int dn = wrap_site(dim, n - np);
                    if (dm == 0 && dn == 0) continue;  // origin term vanishes identically
                    const double mag = polar.magnitude_at(dm, dn);
                    if (mag == 0.0) continue;
                    const double theta = polar.theta_at(dm, dn);
                    const double cross = static_cast<double>(m) * np - static_cast<double>(n) * mp;
                    op(flat(m, n), flat(mp, np)) +=
                        (mag / hbar) * (omega_power(dim, -2.0 * cross + theta - quarter) +
                                        omega_power(dim, 2.0 * cross - theta + quarter));
                }
    const double residue = op.imag().cwiseAbs().maxCoeff();
    if (residue >= 1e-10)
        throw std::runtime_error("liouville operator has imaginary residue " +
                                 std::to_string(residue) + "; polar table is inconsistent");
    return op.real();
}

/// Classic fixed-step 4th-order integration of the coefficient equation.
/// `step` bounds the internal step; each span between requested times is
/// divided into equal steps no longer than it, landing snapshots exactly.
inline EvolutionResult evolve_wigner_ode(const WignerFunction& w0, const PolarTable& polar,
                                         const std::vector<double>& times, double hbar = 1.0,
                                         double step = 1e-3) {
    check_times_sorted(times);
    if (step <= 0.0) throw std::invalid_argument("integration step must be positive");
    if (!times.empty() && times.front() < 0.0)
        throw std::invalid_argument("observation times must be non-negative");
    const int dim = w0.dim();
    const RealMatrix op = liouville_operator(polar, hbar);

    Eigen::VectorXd state = Eigen::Map<const Eigen::VectorXd>(w0.values().data(), dim * dim);
    double t = 0.0;
    EvolutionResult out;
    out.method = EvolutionMethod::CoefficientOde;
    out.times = times;
    out.states.reserve(times.size());
    for (double target : times) {
        const double span = target - t;
        if (span > 0.0) {
            const auto steps = static_cast<long>(std::ceil(span / step - 1e-12));
            const double h = span / static_cast<double>(std::max<long>(steps, 1));
            for (long k = 0; k < std::max<long>(steps, 1); ++k) {
                const Eigen::VectorXd k1 = op * state;
                const Eigen::VectorXd k2 = op * (state + 0.5 * h * k1);
                const Eigen::VectorXd k3 = op * (state + 0.5 * h * k2);
                const Eigen::VectorXd k4 = op * (state + h * k3);
                state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            t = target;
        }
        RealMatrix values = Eigen::Map<const RealMatrix>(state.data(), dim, dim);
        out.states.emplace_back(dim, std::move(values));
    }
    return out;
}

}  // namespace wigmc
