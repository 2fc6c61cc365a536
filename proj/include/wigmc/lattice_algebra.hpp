#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace wigmc {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Lattice dimension must be odd and at least 3; everything downstream
/// relies on 2 being invertible mod N.
inline void check_dimension(int n) {
    if (n < 3 || n % 2 == 0)
        throw std::invalid_argument("lattice dimension must be odd and >= 3, got " +
                                    std::to_string(n));
}

inline int half_span(int n) { return (n - 1) / 2; }

/// Canonical site label in [-(N-1)/2, (N-1)/2].
inline int wrap_site(int n, int value) {
    const int h = half_span(n);
    int r = (value + h) % n;
    if (r < 0) r += n;
    return r - h;
}

/// Row/column index of a site label under the descending ordering
/// (N-1)/2, ..., 0, ..., -(N-1)/2.
inline int site_to_index(int n, int site) { return half_span(n) - wrap_site(n, site); }
inline int index_to_site(int n, int index) { return half_span(n) - index; }

/// A point (m, n) of the Z_N x Z_N phase space, m along the shift
/// direction and n along the phase direction.
struct PhasePoint {
    int m = 0;
    int n = 0;
    friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

inline PhasePoint wrap_point(int dim, PhasePoint p) {
    return {wrap_site(dim, p.m), wrap_site(dim, p.n)};
}

inline PhasePoint add_points(int dim, PhasePoint a, PhasePoint b) {
    return {wrap_site(dim, a.m + b.m), wrap_site(dim, a.n + b.n)};
}

inline PhasePoint negate_point(int dim, PhasePoint p) {
    return {wrap_site(dim, -p.m), wrap_site(dim, -p.n)};
}

/// omega^x = exp(2*pi*i*x/N). The exponent is real-valued: polar phase
/// exponents of Weyl coefficients are fractional in general.
inline Complex omega_power(int n, double x) {
    check_dimension(n);
    return std::polar(1.0, kTwoPi * x / n);
}

/// Q^k: diagonal, entry omega^{k*s} at site label s.
inline ComplexMatrix phase_matrix_power(int n, int k) {
    check_dimension(n);
    ComplexMatrix q = ComplexMatrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        q(i, i) = std::polar(1.0, kTwoPi * static_cast<double>(k) * index_to_site(n, i) / n);
    return q;
}

/// P^k: permutation sending basis vector e_s to e_{s-k}.
inline ComplexMatrix shift_matrix_power(int n, int k) {
    check_dimension(n);
    ComplexMatrix p = ComplexMatrix::Zero(n, n);
    for (int s = -half_span(n); s <= half_span(n); ++s)
        p(site_to_index(n, wrap_site(n, s - k)), site_to_index(n, s)) = 1.0;
    return p;
}

/// Parity matrix T: ones on the anti-diagonal (site s -> -s).
inline ComplexMatrix parity_matrix(int n) {
    check_dimension(n);
    ComplexMatrix t = ComplexMatrix::Zero(n, n);
    for (int s = -half_span(n); s <= half_span(n); ++s)
        t(site_to_index(n, wrap_site(n, -s)), site_to_index(n, s)) = 1.0;
    return t;
}

struct StructureMatrices {
    ComplexMatrix Q;
    ComplexMatrix P;
    ComplexMatrix T;
};

inline StructureMatrices structure_matrices(int n) {
    return {phase_matrix_power(n, 1), shift_matrix_power(n, 1), parity_matrix(n)};
}

/// Weyl displacement matrix W(m,n) = omega^{-2mn} Q^{2n} P^{-2m}.
inline ComplexMatrix weyl_matrix(int dim, int m, int n) {
    check_dimension(dim);
    return omega_power(dim, -2.0 * m * n) * phase_matrix_power(dim, 2 * n) *
           shift_matrix_power(dim, -2 * m);
}

/// The four algebraically equivalent product forms of W(m,n); they must
/// coincide entrywise, which the tests assert.
inline std::vector<ComplexMatrix> weyl_matrix_forms(int dim, int m, int n) {
    check_dimension(dim);
    std::vector<ComplexMatrix> forms;
    forms.push_back(weyl_matrix(dim, m, n));
    forms.push_back(omega_power(dim, 2.0 * m * n) * shift_matrix_power(dim, -2 * m) *
                    phase_matrix_power(dim, 2 * n));
    forms.push_back(shift_matrix_power(dim, -m) * phase_matrix_power(dim, 2 * n) *
                    shift_matrix_power(dim, -m));
    forms.push_back(phase_matrix_power(dim, n) * shift_matrix_power(dim, -2 * m) *
                    phase_matrix_power(dim, n));
    return forms;
}

/// Fano phase-point matrix Delta(m,n) = W(m,n) T; Hermitian.
inline ComplexMatrix fano_matrix(int dim, int m, int n) {
    return weyl_matrix(dim, m, n) * parity_matrix(dim);
}

/// Precomputed Weyl/Fano bases for one lattice dimension. Immutable
/// after construction; shared read-only across workers.
class WeylBasis {
public:
    explicit WeylBasis(int dim) : dim_(dim) {
        check_dimension(dim);
        weyl_.reserve(static_cast<std::size_t>(dim) * dim);
        fano_.reserve(static_cast<std::size_t>(dim) * dim);
        const ComplexMatrix t = parity_matrix(dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) {
                weyl_.push_back(weyl_matrix(dim, index_to_site(dim, i), index_to_site(dim, j)));
                fano_.push_back(weyl_.back() * t);
            }
    }

    int dim() const { return dim_; }

    const ComplexMatrix& weyl(int m, int n) const { return weyl_[flat(m, n)]; }
    const ComplexMatrix& fano(int m, int n) const { return fano_[flat(m, n)]; }

private:
    std::size_t flat(int m, int n) const {
        return static_cast<std::size_t>(site_to_index(dim_, m)) * dim_ + site_to_index(dim_, n);
    }

    int dim_;
    std::vector<ComplexMatrix> weyl_;
    std::vector<ComplexMatrix> fano_;
};

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

inline bool approx_equal(const ComplexMatrix& a, const ComplexMatrix& b, double tol = 1e-12) {
    return a.rows() == b.rows() && a.cols() == b.cols() && max_abs_diff(a, b) <= tol;
}

}  // namespace wigmc
