#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "wigmc/lattice_algebra.hpp"

namespace wigmc {

/// Real quasi-distribution on Z_N x Z_N: the Fano coefficients of a
/// density matrix. Values may be negative; |value| <= 1/N for physical
/// states and the values of a unit-trace matrix sum to 1.
class WignerFunction {
public:
    explicit WignerFunction(int dim) : dim_(dim), values_(RealMatrix::Zero(dim, dim)) {
        check_dimension(dim);
    }

    WignerFunction(int dim, RealMatrix values) : dim_(dim), values_(std::move(values)) {
        check_dimension(dim);
        if (values_.rows() != dim || values_.cols() != dim)
            throw std::invalid_argument("wigner value array must be N x N");
    }

    int dim() const { return dim_; }

    double value(int m, int n) const {
        return values_(site_to_index(dim_, m), site_to_index(dim_, n));
    }
    double& at(int m, int n) {
        return values_(site_to_index(dim_, m), site_to_index(dim_, n));
    }

    const RealMatrix& values() const { return values_; }
    RealMatrix& values() { return values_; }

    double sum() const { return values_.sum(); }
    double max_abs() const { return values_.cwiseAbs().maxCoeff(); }

private:
    int dim_;
    RealMatrix values_;  // (row, col) = (index of m, index of n)
};

struct DensityMatrix {
    ComplexMatrix mat;
};

inline double hermiticity_deviation(const ComplexMatrix& a) {
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

/// Builds rho = |psi><psi| from a state vector; the norm must be within
/// `norm_tol` of 1 and is then normalized away exactly.
inline DensityMatrix density_from_state(const Eigen::VectorXcd& psi, double norm_tol = 1e-8) {
    const double nrm = psi.norm();
    if (std::abs(nrm - 1.0) > norm_tol)
        throw std::invalid_argument("state vector norm deviates from 1 by " +
                                    std::to_string(std::abs(nrm - 1.0)));
    Eigen::VectorXcd unit = psi / nrm;
    return {unit * unit.adjoint()};
}

inline void validate_density(const ComplexMatrix& rho, bool check_positivity = false) {
    if (rho.rows() != rho.cols()) throw std::invalid_argument("density matrix must be square");
    if (hermiticity_deviation(rho) > 1e-12)
        throw std::invalid_argument("density matrix is not Hermitian to 1e-12");
    if (std::abs(rho.trace() - Complex(1.0, 0.0)) > 1e-12)
        throw std::invalid_argument("density matrix trace deviates from 1");
    if (check_positivity) {
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("eigendecomposition of density matrix failed");
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw std::invalid_argument("density matrix has eigenvalue below -1e-10");
    }
}

/// rho(m,n) = Tr[rho Delta(m,n)] / N. The traces must be real up to
/// rounding; an imaginary residue >= 1e-10 signals a non-Hermitian input.
inline WignerFunction wigner_from_density(const WeylBasis& basis, const ComplexMatrix& rho) {
    const int dim = basis.dim();
    if (rho.rows() != dim || rho.cols() != dim)
        throw std::invalid_argument("density matrix dimension does not match basis");
    WignerFunction w(dim);
    double max_residue = 0.0;
    for (int m = -half_span(dim); m <= half_span(dim); ++m)
        for (int n = -half_span(dim); n <= half_span(dim); ++n) {
            const Complex tr = (rho * basis.fano(m, n)).trace() / static_cast<double>(dim);
            max_residue = std::max(max_residue, std::abs(tr.imag()));
            w.at(m, n) = tr.real();
        }
    if (max_residue >= 1e-10)
        throw std::invalid_argument("wigner transform has imaginary residue " +
                                    std::to_string(max_residue) + "; input not Hermitian?");
    return w;
}

inline WignerFunction wigner_from_density(const WeylBasis& basis, const DensityMatrix& rho) {
    return wigner_from_density(basis, rho.mat);
}

/// Inverse transform rho = sum_{m,n} Delta(m,n) w(m,n); exact inverse of
/// wigner_from_density by completeness of the Fano basis.
inline ComplexMatrix density_from_wigner(const WeylBasis& basis, const WignerFunction& w) {
    const int dim = basis.dim();
    if (w.dim() != dim) throw std::invalid_argument("wigner dimension does not match basis");
    ComplexMatrix rho = ComplexMatrix::Zero(dim, dim);
    for (int m = -half_span(dim); m <= half_span(dim); ++m)
        for (int n = -half_span(dim); n <= half_span(dim); ++n)
            rho += basis.fano(m, n) * w.value(m, n);
    return rho;
}

struct Marginals {
    Eigen::VectorXd position;  // entry i is the probability of site label (N-1)/2 - i
    Eigen::VectorXd momentum;  // same ordering in the dual label p
};

/// Axis sums of the Wigner function. The index map is frozen:
///   position[q] = sum_n value(q, n)   (diagonal of rho in the site basis)
///   momentum[p] = sum_m value(m, -p)  (|psi~(p)|^2 with psi~(p) = N^{-1/2} sum_q omega^{pq} psi(q))
/// both verified against brute-force oracles in the test suite.
inline Marginals marginals(const WignerFunction& w) {
    const int dim = w.dim();
    Marginals out;
    out.position = Eigen::VectorXd::Zero(dim);
    out.momentum = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < dim; ++i) {
        const int label = index_to_site(dim, i);
        double pos = 0.0, mom = 0.0;
        for (int s = -half_span(dim); s <= half_span(dim); ++s) {
            pos += w.value(label, s);
            mom += w.value(s, wrap_site(dim, -label));
        }
        out.position(i) = pos;
        out.momentum(i) = mom;
    }
    return out;
}

/// Site weights g(m,n) = Tr[Delta(m,n) A] for a Hermitian observable A,
/// so that <A> = sum_{m,n} w(m,n) g(m,n).
inline RealMatrix observable_weights(const WeylBasis& basis, const ComplexMatrix& a) {
    const int dim = basis.dim();
    if (hermiticity_deviation(a) > 1e-10)
        throw std::invalid_argument("observable must be Hermitian");
    RealMatrix g(dim, dim);
    for (int m = -half_span(dim); m <= half_span(dim); ++m)
        for (int n = -half_span(dim); n <= half_span(dim); ++n) {
            const Complex tr = (basis.fano(m, n) * a).trace();
            g(site_to_index(dim, m), site_to_index(dim, n)) = tr.real();
        }
    return g;
}

inline double expectation(const WignerFunction& w, const RealMatrix& site_weights) {
    return (w.values().array() * site_weights.array()).sum();
}

}  // namespace wigmc
